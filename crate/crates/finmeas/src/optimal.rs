//! The constructive core: the correlation ceiling C_max (general and
//! closed-form), the optimal correlating unitary for a qubit system with an
//! N-qubit thermal pointer, the general-dimension construction, and the
//! energy cost accounting (cooling cost ΔE_I, correlating cost ΔE_II, cost
//! curves over fridge gaps).
//!
//! The optimal channel is always a permutation of the product energy basis.
//! With λ = d_P/d_S and the stride-d_S interleaved pointer projectors, each
//! source system level k routes the λ largest Boltzmann weights (sector 0)
//! onto the correlated diagonal cell (k, blocks[k]) in rank order — which
//! realizes C = C_max for every diagonal ρ_S — and distributes the remaining
//! weights over the off-diagonal cells (m ≠ k, blocks[k]) by pairing the
//! largest weights with the smallest energies. For d_S = 2 (and whenever the
//! sector weight ranges do not interleave) this reduces to the sector-wise
//! outcome-pairing table π.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::PointerPartition;
use crate::qmat::{apply_channel, kron, BasisPermutation, MeasurementChannel};
use crate::states::{
    binomial, energy, gibbs, joint_hamiltonian, qubit_pointer_spectrum, DensityMatrix,
    SectoredSpectrum, ThermalWeights,
};

/// Exact CSV header for cost-curve emission.
pub const CSV_HEADER: &str = "E_F_over_EP,beta_prime,c_max,dE_I,dE_II,dE_total";

/// 17-significant-digit float formatting used for byte-stable CSV output.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sum of the d_P/d_S largest Boltzmann weights: the algebraic ceiling on the
/// correlation achievable by unbiased unitary measurements.
pub fn c_max(spec: &SectoredSpectrum, beta: f64) -> Result<f64> {
    let sorted = spec.sorted();
    let lam = sorted.sector_size()?;
    let (_, w) = gibbs(&sorted, beta)?;
    // Weights along a sorted spectrum are non-increasing, so the top
    // sector is the leading block.
    Ok(w.weights()[..lam].iter().sum())
}

/// Closed-form C_max for a single-qubit system with an N-qubit pointer at
/// dimensionless inverse temperature βE_P.
///
/// Odd N: (1/Z^N)·Σ_{k=0}^{⌊N/2⌋} C(N,k)·e^{−kβE_P}. Even N: the same sum
/// over full levels k < N/2 plus half the multiplicity of the middle level,
/// since the sorted 2^(N-1) largest weights split level N/2 in half.
pub fn c_max_qubit_closed_form(n: u32, beta_ep: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("pointer must have at least one qubit".into()));
    }
    if beta_ep.is_nan() || beta_ep < 0.0 {
        return Err(Error::Domain(format!("inverse temperature {beta_ep} out of range")));
    }
    if beta_ep.is_infinite() {
        return Ok(1.0);
    }
    let z = 1.0 + (-beta_ep).exp();
    let mut num = 0.0;
    if n % 2 == 1 {
        for k in 0..=(n / 2) {
            num += binomial(n, k) * (-(k as f64) * beta_ep).exp();
        }
    } else {
        for k in 0..(n / 2) {
            num += binomial(n, k) * (-(k as f64) * beta_ep).exp();
        }
        num += 0.5 * binomial(n, n / 2) * (-((n / 2) as f64) * beta_ep).exp();
    }
    Ok(num / z.powi(n as i32))
}

/// Stride-d_S interleaved pointer partition over the sorted spectrum:
/// block j collects the sorted indices congruent to j modulo d_S. For
/// d_S = 2 this is the even/odd (nearest-neighbour pair) split.
pub fn interleaved_partition(d_p: usize, d_s: usize) -> Result<PointerPartition> {
    if d_s == 0 || d_p % d_s != 0 {
        return Err(Error::Rank(format!(
            "pointer dimension {d_p} not divisible into {d_s} blocks"
        )));
    }
    let blocks = (0..d_s)
        .map(|j| (j..d_p).step_by(d_s).collect())
        .collect();
    PointerPartition::new(d_p, blocks)
}

/// The d_S×d_S sector-level outcome-pairing table: π[m][m] = 0 (sector 0
/// feeds the correlated diagonal), π[m][k] = m for k < m and m+1 for k > m,
/// so each column visits every sector exactly once. The realized assignment
/// refines this table by exact largest-weight/smallest-energy pairing in the
/// non-correlated subspace; the two coincide for d_S = 2.
pub fn pairing_matrix(d_s: usize) -> Vec<Vec<usize>> {
    (0..d_s)
        .map(|m| {
            (0..d_s)
                .map(|k| {
                    if k == m {
                        0
                    } else if k < m {
                        m
                    } else {
                        m + 1
                    }
                })
                .collect()
        })
        .collect()
}

/// The optimal unbiased correlating construction for one (system, pointer, β)
/// instance: partition, permutation channel, pairing data and the reached
/// correlation ceiling.
#[derive(Debug, Clone)]
pub struct OptimalConstruction {
    partition: PointerPartition,
    channel: MeasurementChannel,
    x_star: Vec<f64>,
    pairing_pi: Vec<Vec<usize>>,
    c_max: f64,
    weights: ThermalWeights,
    rho_s_diag: Vec<f64>,
    sys: SectoredSpectrum,
    ptr: SectoredSpectrum,
    beta: f64,
}

impl OptimalConstruction {
    pub fn partition(&self) -> &PointerPartition {
        &self.partition
    }

    pub fn channel(&self) -> &MeasurementChannel {
        &self.channel
    }

    /// Permutation carrier of the channel.
    pub fn permutation(&self) -> &BasisPermutation {
        match &self.channel {
            MeasurementChannel::Permutation(p) => p,
            _ => unreachable!("optimal channel is always a permutation"),
        }
    }

    /// Energy pairing values x_i = Σ_k ρ_kk·(E_S,k + E_blocks[k][i]) carried
    /// by the sector-0 weights on the correlated diagonal.
    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn pairing_pi(&self) -> &[Vec<usize>] {
        &self.pairing_pi
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn weights(&self) -> &ThermalWeights {
        &self.weights
    }

    /// Sector weight lists a^(k) of the sorted pointer spectrum.
    pub fn sector_weights(&self) -> Vec<Vec<f64>> {
        let lam = self.lambda();
        self.weights
            .weights()
            .chunks(lam)
            .map(|c| c.to_vec())
            .collect()
    }

    pub fn rho_s_diag(&self) -> &[f64] {
        &self.rho_s_diag
    }

    pub fn system_spectrum(&self) -> &SectoredSpectrum {
        &self.sys
    }

    /// Sorted pointer spectrum the construction was built on.
    pub fn pointer_spectrum(&self) -> &SectoredSpectrum {
        &self.ptr
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn d_s(&self) -> usize {
        self.sys.dim()
    }

    fn lambda(&self) -> usize {
        self.ptr.dim() / self.d_s()
    }

    /// Diagonal of the post-interaction joint state in product basis order:
    /// the source weight ρ_kk·p_g lands on the image of (k, g) under the
    /// permutation.
    pub fn output_diagonal(&self) -> Vec<f64> {
        let d_s = self.d_s();
        let d_p = self.ptr.dim();
        let p = self.weights.weights();
        let image = self.permutation().image();
        let mut out = vec![0.0; d_s * d_p];
        for k in 0..d_s {
            for g in 0..d_p {
                out[image[k * d_p + g]] = self.rho_s_diag[k] * p[g];
            }
        }
        out
    }

    /// tr[H_SP ρ_SP] before the interaction.
    pub fn initial_energy(&self) -> f64 {
        let sys: f64 = self
            .rho_s_diag
            .iter()
            .zip(self.sys.energies())
            .map(|(r, e)| r * e)
            .sum();
        let ptr: f64 = self
            .weights
            .weights()
            .iter()
            .zip(self.ptr.energies())
            .map(|(p, e)| p * e)
            .sum();
        sys + ptr
    }

    /// tr[H_SP ρ̃_SP] after the interaction, from the closed-form final state.
    pub fn final_energy(&self) -> f64 {
        let d_p = self.ptr.dim();
        let diag = self.output_diagonal();
        let mut acc = 0.0;
        for (j, w) in diag.iter().enumerate() {
            acc += w * (self.sys.energies()[j / d_p] + self.ptr.energies()[j % d_p]);
        }
        acc
    }
}

fn validate_rho_diag(rho_s_diag: &[f64]) -> Result<()> {
    if rho_s_diag.iter().any(|&r| !(r >= -1e-12)) {
        return Err(Error::Domain("negative system population".into()));
    }
    let total: f64 = rho_s_diag.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Domain("system populations do not sum to 1".into()));
    }
    Ok(())
}

/// Builds the optimal unbiased correlating permutation for an arbitrary
/// system spectrum / diagonal and pointer spectrum at inverse temperature β.
pub fn build_optimal_general(
    sys: &SectoredSpectrum,
    rho_s_diag: &[f64],
    ptr: &SectoredSpectrum,
    beta: f64,
) -> Result<OptimalConstruction> {
    let d_s = sys.dim();
    if rho_s_diag.len() != d_s {
        return Err(Error::Size("system diagonal length mismatch".into()));
    }
    validate_rho_diag(rho_s_diag)?;
    if ptr.dim() % d_s != 0 {
        return Err(Error::Rank(format!(
            "pointer dimension {} not divisible by system dimension {}",
            ptr.dim(),
            d_s
        )));
    }
    let ptr_sorted = {
        let mut s = ptr.sorted();
        // Re-sector the sorted pointer by the system dimension.
        s = SectoredSpectrum::new(s.energies().to_vec(), d_s)?;
        s
    };
    let d_p = ptr_sorted.dim();
    let lam = d_p / d_s;
    let (_, weights) = gibbs(&ptr_sorted, beta)?;
    let partition = interleaved_partition(d_p, d_s)?;
    let pi = pairing_matrix(d_s);

    let mut image = vec![0usize; d_s * d_p];
    for k in 0..d_s {
        // Correlated subspace: the λ largest weights land on the diagonal
        // cell (k, blocks[k]) in rank order — weights and block energies are
        // both monotone along i, so this is already the minimal pairing.
        for i in 0..lam {
            image[k * d_p + i] = k * d_p + partition.blocks()[k][i];
        }
        // Non-correlated subspace: remaining weights (non-increasing along
        // the sorted spectrum) meet the off-diagonal slots in ascending
        // energy order — largest weights paired with smallest energies.
        let mut slots: Vec<(f64, usize, usize)> = Vec::with_capacity((d_s - 1) * lam);
        for m in (0..d_s).filter(|&m| m != k) {
            for i in 0..lam {
                let cost = sys.energies()[m] + ptr_sorted.energies()[partition.blocks()[k][i]];
                slots.push((cost, m, i));
            }
        }
        slots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (t, &(_, m, i)) in slots.iter().enumerate() {
            image[k * d_p + lam + t] = m * d_p + partition.blocks()[k][i];
        }
    }
    let channel = MeasurementChannel::Permutation(BasisPermutation::new(image)?);

    let x_star = (0..lam)
        .map(|i| {
            (0..d_s)
                .map(|k| {
                    rho_s_diag[k]
                        * (sys.energies()[k] + ptr_sorted.energies()[partition.blocks()[k][i]])
                })
                .sum()
        })
        .collect();
    let c = weights.weights()[..lam].iter().sum();

    Ok(OptimalConstruction {
        partition,
        channel,
        x_star,
        pairing_pi: pi,
        c_max: c,
        weights,
        rho_s_diag: rho_s_diag.to_vec(),
        sys: sys.clone(),
        ptr: ptr_sorted,
        beta,
    })
}

/// Optimal construction for a single-qubit system with an N-qubit pointer of
/// gap E_P. The system levels are degenerate at 0 (the correlating cost at
/// ρ_S = 1/2 does not depend on the system gap).
pub fn build_optimal_qubit_pointer(
    n: u32,
    e_p: f64,
    beta: f64,
    rho_s_diag: (f64, f64),
) -> Result<OptimalConstruction> {
    let sys = SectoredSpectrum::new(vec![0.0, 0.0], 2)?;
    let ptr = qubit_pointer_spectrum(n, e_p)?;
    build_optimal_general(&sys, &[rho_s_diag.0, rho_s_diag.1], &ptr, beta)
}

/// Majorization check: does x majorize y? Requires equal totals (to 1e-9)
/// and dominance of all descending-sorted prefix sums.
pub fn majorizes(x: &[f64], y: &[f64]) -> bool {
    if x.len() != y.len() {
        return false;
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ys.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let (mut cx, mut cy) = (0.0, 0.0);
    for (a, b) in xs.iter().zip(ys.iter()) {
        cx += a;
        cy += b;
        if cx < cy - 1e-9 {
            return false;
        }
    }
    (cx - cy).abs() <= 1e-9
}

/// Correlating cost ΔE_II from the closed-form final state (no channel
/// simulation). For a qubit system at ρ_S = 1/2 this reduces to the
/// nearest-neighbour pair formula
/// ½·Σ_i[(s_2i + s_2i+1 − 2s_i)·p_i^(0) + (s_2i + s_2i+1 − 2s_(λ+i))·p_i^(1)],
/// which is used verbatim in that case.
pub fn delta_e_corr_analytic(constr: &OptimalConstruction) -> f64 {
    let d_s = constr.d_s();
    let lam = constr.lambda();
    let half = d_s == 2 && (constr.rho_s_diag[0] - 0.5).abs() < 1e-14;
    if half {
        let s = constr.ptr.energies();
        let p = constr.weights.weights();
        let mut acc = 0.0;
        for i in 0..lam {
            acc += 0.5
                * ((s[2 * i] + s[2 * i + 1] - 2.0 * s[i]) * p[i]
                    + (s[2 * i] + s[2 * i + 1] - 2.0 * s[lam + i]) * p[lam + i]);
        }
        acc
    } else {
        constr.final_energy() - constr.initial_energy()
    }
}

/// Correlating cost ΔE_II by dense simulation: materializes ρ_S ⊗ τ(β),
/// applies the channel, and takes the joint-Hamiltonian trace difference.
pub fn delta_e_corr_numeric(constr: &OptimalConstruction) -> Result<f64> {
    let (tau, _) = gibbs(&constr.ptr, constr.beta)?;
    let rho_s = DensityMatrix::from_diagonal(&constr.rho_s_diag)?;
    let joint_in = kron(rho_s.matrix(), tau.matrix())?;
    let joint_out = apply_channel(&constr.channel, &joint_in)?;
    let h = joint_hamiltonian(&constr.sys, &constr.ptr);
    let e_in = energy(&DensityMatrix::new(joint_in)?, &h)?;
    let e_out = energy(&DensityMatrix::new(joint_out)?, &h)?;
    Ok(e_out - e_in)
}

/// Minimal cooling cost for taking N pointer qubits of gap E_P from β to
/// β' = βE_F/E_P with one fridge qubit of gap E_F per pointer qubit:
/// ΔE_I = N·(E_F − E_P)·(g(βE_F) − g(βE_P)), g the thermal ground population.
pub fn cooling_cost(n: u32, e_p: f64, e_f: f64, beta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("need at least one pointer qubit".into()));
    }
    if !(beta > 0.0) || beta.is_infinite() {
        return Err(Error::Domain("cooling requires a finite positive initial β".into()));
    }
    if !(e_p > 0.0) {
        return Err(Error::Domain("pointer gap must be positive".into()));
    }
    if e_f < e_p {
        return Err(Error::Domain("fridge gap below pointer gap (heating not modeled)".into()));
    }
    let ground = |x: f64| 1.0 / ((-x).exp() + 1.0);
    Ok(n as f64 * (e_f - e_p) * (ground(beta * e_f) - ground(beta * e_p)))
}

/// One record of the cost curve: fridge gap, cooled inverse temperature,
/// reachable correlation ceiling and the two energy costs.
#[derive(Debug, Clone, Serialize)]
pub struct CostCurvePoint {
    #[serde(rename = "E_F_over_EP")]
    pub e_f_over_ep: f64,
    pub beta_prime: f64,
    pub c_max: f64,
    #[serde(rename = "dE_I")]
    pub d_e_i: f64,
    #[serde(rename = "dE_II")]
    pub d_e_ii: f64,
    #[serde(rename = "dE_total")]
    pub d_e_total: f64,
}

impl CostCurvePoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            format_float(self.e_f_over_ep),
            format_float(self.beta_prime),
            format_float(self.c_max),
            format_float(self.d_e_i),
            format_float(self.d_e_ii),
            format_float(self.d_e_total),
        )
    }
}

/// Cost curve over a grid of fridge gaps: per gap E_F, the pointer is cooled
/// to β' = βE_F/E_P, C_max is evaluated at β', ΔE_II is the correlating cost
/// of the optimal construction at β' probing an unknown state (ρ_S = 1/2).
/// Points are ordered by C_max.
pub fn cost_curve(n: u32, e_p: f64, beta: f64, fridge_gaps: &[f64]) -> Result<Vec<CostCurvePoint>> {
    let spec = qubit_pointer_spectrum(n, e_p)?;
    let mut points = Vec::with_capacity(fridge_gaps.len());
    for &e_f in fridge_gaps {
        if e_f < e_p {
            return Err(Error::Domain(format!(
                "fridge gap {e_f} below pointer gap {e_p}"
            )));
        }
        let beta_prime = beta * e_f / e_p;
        let c = c_max(&spec, beta_prime)?;
        let d_e_i = cooling_cost(n, e_p, e_f, beta)?;
        let constr = build_optimal_qubit_pointer(n, e_p, beta_prime, (0.5, 0.5))?;
        let d_e_ii = delta_e_corr_analytic(&constr);
        points.push(CostCurvePoint {
            e_f_over_ep: e_f / e_p,
            beta_prime,
            c_max: c,
            d_e_i,
            d_e_ii,
            d_e_total: d_e_i + d_e_ii,
        });
    }
    points.sort_by(|a, b| a.c_max.partial_cmp(&b.c_max).unwrap());
    Ok(points)
}
