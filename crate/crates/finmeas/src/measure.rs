//! Measurement procedures as channels over a system ⊗ pointer product space:
//! pointer partitions, the three property checkers (unbiased / faithful /
//! non-invasive) in single-state and all-states form, correlation functions,
//! correlation-matrix extraction, structured channel constructors and
//! validators, and the standard worked examples.
//!
//! Conventions: the joint basis index is system-major, `s·d_P + n` for system
//! level `s` and pointer level `n`. Outcome `i` is declared when the pointer
//! is found in block `i` of the partition.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::qmat::{
    apply_channel, kron, partial_trace, BasisPermutation, CMatrix, Keep, MeasurementChannel, C64,
    STRUCT_TOL,
};
use crate::states::DensityMatrix;

/// Verdict tolerance: `FINMEAS_TOL` env override or the 1e-10 default.
pub fn default_tolerance() -> f64 {
    std::env::var("FINMEAS_TOL")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|t| t.is_finite() && *t > 0.0)
        .unwrap_or(STRUCT_TOL)
}

/// d_S disjoint index sets over the pointer basis defining the outcome
/// projectors Π_i, optionally relative to a change-of-basis unitary
/// (default: identity, i.e. the energy eigenbasis).
#[derive(Debug, Clone)]
pub struct PointerPartition {
    d_p: usize,
    blocks: Vec<Vec<usize>>,
    basis: Option<CMatrix>,
}

impl PointerPartition {
    /// Validates that the blocks are pairwise disjoint and cover [0, d_p).
    pub fn new(d_p: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Partition("no outcome blocks".into()));
        }
        let mut seen = vec![false; d_p];
        for block in &blocks {
            for &n in block {
                if n >= d_p {
                    return Err(Error::Partition(format!(
                        "pointer index {n} out of range {d_p}"
                    )));
                }
                if seen[n] {
                    return Err(Error::Partition(format!("pointer index {n} in two blocks")));
                }
                seen[n] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Partition("blocks do not cover the pointer basis".into()));
        }
        Ok(PointerPartition {
            d_p,
            blocks,
            basis: None,
        })
    }

    /// Outcome-per-level partition Π_i = |i⟩⟨i| on a d-dimensional pointer.
    pub fn singletons(d: usize) -> Self {
        PointerPartition {
            d_p: d,
            blocks: (0..d).map(|i| vec![i]).collect(),
            basis: None,
        }
    }

    /// Attaches a change-of-basis unitary B: Π_i = B·P_i·B† with P_i the
    /// index-set projector.
    pub fn with_basis(mut self, basis: CMatrix) -> Result<Self> {
        if basis.rows() != self.d_p || !basis.is_unitary(STRUCT_TOL) {
            return Err(Error::Partition("basis must be a d_P-dimensional unitary".into()));
        }
        self.basis = Some(basis);
        Ok(self)
    }

    pub fn d_s(&self) -> usize {
        self.blocks.len()
    }

    pub fn d_p(&self) -> usize {
        self.d_p
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn basis(&self) -> Option<&CMatrix> {
        self.basis.as_ref()
    }

    /// Common block size; errors when blocks have unequal ranks (the unitary
    /// constructions require all projectors to have the same rank).
    pub fn equal_block_size(&self) -> Result<usize> {
        let size = self.blocks[0].len();
        if self.blocks.iter().any(|b| b.len() != size) {
            return Err(Error::Rank("outcome blocks have unequal ranks".into()));
        }
        Ok(size)
    }

    /// Dense d_P×d_P projector Π_i.
    pub fn projector(&self, i: usize) -> Result<CMatrix> {
        if i >= self.d_s() {
            return Err(Error::Partition(format!("outcome {i} out of range")));
        }
        let mut p = CMatrix::zeros(self.d_p, self.d_p);
        for &n in &self.blocks[i] {
            p.set(n, n, C64::new(1.0, 0.0));
        }
        match &self.basis {
            None => Ok(p),
            Some(b) => b.mul(&p)?.mul(&b.adjoint()),
        }
    }

    /// tr[(1_S ⊗ Π_i) m] for a joint matrix m of dimension d_S·d_P.
    pub fn projected_trace(&self, m: &CMatrix, i: usize) -> Result<C64> {
        let d_s = self.d_s();
        if m.rows() != d_s * self.d_p {
            return Err(Error::Size("joint matrix / partition dimension mismatch".into()));
        }
        match &self.basis {
            None => {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..d_s {
                    for &n in &self.blocks[i] {
                        acc += m.get(s * self.d_p + n, s * self.d_p + n);
                    }
                }
                Ok(acc)
            }
            Some(_) => {
                let proj = self.projector(i)?;
                // tr[(1 ⊗ Π_i) m] block by block over the system index.
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..d_s {
                    for a in 0..self.d_p {
                        for b in 0..self.d_p {
                            acc += proj.get(a, b) * m.get(s * self.d_p + b, s * self.d_p + a);
                        }
                    }
                }
                Ok(acc)
            }
        }
    }

    /// tr[(|i⟩⟨i| ⊗ Π_i) m]: the outcome-i correlation term.
    pub fn correlated_trace(&self, m: &CMatrix, i: usize) -> Result<C64> {
        let d_s = self.d_s();
        if m.rows() != d_s * self.d_p {
            return Err(Error::Size("joint matrix / partition dimension mismatch".into()));
        }
        match &self.basis {
            None => {
                let mut acc = C64::new(0.0, 0.0);
                for &n in &self.blocks[i] {
                    acc += m.get(i * self.d_p + n, i * self.d_p + n);
                }
                Ok(acc)
            }
            Some(_) => {
                let proj = self.projector(i)?;
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..self.d_p {
                    for b in 0..self.d_p {
                        acc += proj.get(a, b) * m.get(i * self.d_p + b, i * self.d_p + a);
                    }
                }
                Ok(acc)
            }
        }
    }
}

/// C(ρ̃_SP) = Σ_i tr[(|i⟩⟨i| ⊗ Π_i) ρ̃_SP]: probability that the pointer
/// outcome coincides with the system state.
pub fn correlation(rho_sp: &DensityMatrix, part: &PointerPartition) -> Result<f64> {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..part.d_s() {
        acc += part.correlated_trace(rho_sp.matrix(), i)?;
    }
    Ok(acc.re)
}

/// C̄ = (1/d_S)·Σ_i tr[Ã_ii]: the correlation of the channel output with the
/// maximally mixed system, ρ_S = 1/d_S.
pub fn average_correlation(
    ch: &MeasurementChannel,
    ptr: &DensityMatrix,
    part: &PointerPartition,
) -> Result<f64> {
    let rho_s = DensityMatrix::maximally_mixed(part.d_s())?;
    let joint = kron(rho_s.matrix(), ptr.matrix())?;
    let out = apply_channel(ch, &joint)?;
    let out = DensityMatrix::new(out)?;
    correlation(&out, part)
}

/// Probe mode for the property checkers.
#[derive(Debug, Clone)]
pub enum Probe {
    /// Evaluate the three defining equalities at one system state.
    Fixed(DensityMatrix),
    /// Exhaustive check: the properties are linear functionals of ρ_S, so
    /// matching on all d_S² matrix units |j⟩⟨k| settles them for every state.
    AllStates,
}

/// Residuals of the three measurement properties with verdicts at `tol`.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub unbiased_residual: f64,
    pub faithful_residual: f64,
    pub noninvasive_residual: f64,
    /// True when produced by the all-states probe mode.
    pub all_states: bool,
    pub tol: f64,
}

impl PropertyReport {
    pub fn unbiased(&self) -> bool {
        self.unbiased_residual <= self.tol
    }

    pub fn faithful(&self) -> bool {
        self.faithful_residual <= self.tol
    }

    pub fn noninvasive(&self) -> bool {
        self.noninvasive_residual <= self.tol
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "unbiased": self.unbiased(),
            "faithful": self.faithful(),
            "noninvasive": self.noninvasive(),
            "residuals": {
                "unbiased": self.unbiased_residual,
                "faithful": self.faithful_residual,
                "noninvasive": self.noninvasive_residual,
            },
            "mode": if self.all_states { "all" } else { "fixed" },
        })
    }
}

/// Evaluates the three properties of a channel acting on ρ_S ⊗ ptr.
pub fn check_properties(
    ch: &MeasurementChannel,
    ptr: &DensityMatrix,
    part: &PointerPartition,
    probe: &Probe,
) -> Result<PropertyReport> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    if ptr.dim() != d_p || ch.dim() != d_s * d_p {
        return Err(Error::Size("channel / pointer / partition dimension mismatch".into()));
    }
    let tol = default_tolerance();
    match probe {
        Probe::Fixed(rho_s) => {
            if rho_s.dim() != d_s {
                return Err(Error::Size("probe state has wrong dimension".into()));
            }
            let joint = kron(rho_s.matrix(), ptr.matrix())?;
            let out = apply_channel(ch, &joint)?;
            let diag: Vec<f64> = rho_s.diagonal();
            Ok(state_report(&out, part, &diag, tol, false)?)
        }
        Probe::AllStates => {
            let mut unbiased = 0.0f64;
            let mut faithful = 0.0f64;
            let mut noninvasive = 0.0f64;
            for j in 0..d_s {
                for k in 0..d_s {
                    let mut unit = CMatrix::zeros(d_s, d_s);
                    unit.set(j, k, C64::new(1.0, 0.0));
                    let out = apply_channel(ch, &kron(&unit, ptr.matrix())?)?;
                    // Unbiased: outcome functional must equal the probe's
                    // i-th diagonal entry, δ_ij·δ_ik.
                    for i in 0..d_s {
                        let target = if i == j && i == k { 1.0 } else { 0.0 };
                        let got = part.projected_trace(&out, i)?;
                        unbiased = unbiased.max((got - target).norm());
                    }
                    // Faithful: C functional must equal tr|j⟩⟨k| = δ_jk.
                    let mut c = C64::new(0.0, 0.0);
                    for i in 0..d_s {
                        c += part.correlated_trace(&out, i)?;
                    }
                    let target = if j == k { 1.0 } else { 0.0 };
                    faithful = faithful.max((c - target).norm());
                    // Non-invasive: reduced system diagonal must match the
                    // probe's diagonal.
                    let red = partial_trace(&out, (d_s, d_p), Keep::A)?;
                    for i in 0..d_s {
                        let target = if i == j && i == k { 1.0 } else { 0.0 };
                        noninvasive = noninvasive.max((red.get(i, i) - target).norm());
                    }
                }
            }
            Ok(PropertyReport {
                unbiased_residual: unbiased,
                faithful_residual: faithful,
                noninvasive_residual: noninvasive,
                all_states: true,
                tol,
            })
        }
    }
}

/// Fixed-state property check on an already-interacted joint state, against
/// the reference pre-measurement system diagonal.
pub fn check_state_properties(
    rho_sp: &DensityMatrix,
    part: &PointerPartition,
    rho_s_diag: &[f64],
) -> Result<PropertyReport> {
    if rho_s_diag.len() != part.d_s() {
        return Err(Error::Size("reference diagonal has wrong length".into()));
    }
    state_report(rho_sp.matrix(), part, rho_s_diag, default_tolerance(), false)
}

fn state_report(
    out: &CMatrix,
    part: &PointerPartition,
    rho_s_diag: &[f64],
    tol: f64,
    all_states: bool,
) -> Result<PropertyReport> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    let mut unbiased = 0.0f64;
    let mut c = C64::new(0.0, 0.0);
    for i in 0..d_s {
        let got = part.projected_trace(out, i)?;
        unbiased = unbiased.max((got - rho_s_diag[i]).norm());
        c += part.correlated_trace(out, i)?;
    }
    let faithful = (c - C64::new(1.0, 0.0)).norm();
    let red = partial_trace(out, (d_s, d_p), Keep::A)?;
    let mut noninvasive = 0.0f64;
    for i in 0..d_s {
        noninvasive = noninvasive.max((red.get(i, i) - rho_s_diag[i]).norm());
    }
    Ok(PropertyReport {
        unbiased_residual: unbiased,
        faithful_residual: faithful,
        noninvasive_residual: noninvasive,
        all_states,
        tol,
    })
}

/// One violated implication between the three properties.
#[derive(Debug, Clone)]
pub struct ImplicationViolation {
    pub name: &'static str,
    pub premise_residuals: Vec<f64>,
    pub conclusion_residual: f64,
}

/// Premise threshold for implication checks.
pub const IMPLICATION_PREMISE_TOL: f64 = 1e-12;
/// Conclusion threshold for implication checks (looser: the proofs are exact
/// but the premises only hold numerically).
pub const IMPLICATION_CONCLUSION_TOL: f64 = 1e-9;

/// Checks the pairwise implications on one report:
/// faithful ∧ unbiased ⇒ non-invasive, faithful ∧ non-invasive ⇒ unbiased,
/// and — only meaningful in all-states mode — unbiased ∧ non-invasive ⇒
/// faithful.
pub fn check_implications(report: &PropertyReport) -> Vec<ImplicationViolation> {
    let mut violations = vec![];
    let mut check = |name, premises: Vec<f64>, conclusion: f64| {
        let hold = premises.iter().all(|&r| r <= IMPLICATION_PREMISE_TOL);
        if hold && conclusion > IMPLICATION_CONCLUSION_TOL {
            violations.push(ImplicationViolation {
                name,
                premise_residuals: premises,
                conclusion_residual: conclusion,
            });
        }
    };
    check(
        "faithful+unbiased=>noninvasive",
        vec![report.faithful_residual, report.unbiased_residual],
        report.noninvasive_residual,
    );
    check(
        "faithful+noninvasive=>unbiased",
        vec![report.faithful_residual, report.noninvasive_residual],
        report.unbiased_residual,
    );
    if report.all_states {
        check(
            "unbiased+noninvasive=>faithful",
            vec![report.unbiased_residual, report.noninvasive_residual],
            report.faithful_residual,
        );
    }
    violations
}

/// Reports from both probe modes plus any violated implications.
#[derive(Debug, Clone)]
pub struct ImplicationSuite {
    pub fixed: PropertyReport,
    pub all_states: PropertyReport,
    pub violations: Vec<ImplicationViolation>,
}

/// Runs both probe modes for a channel and collects implication violations.
/// The fixed-state probe is the maximally mixed system.
pub fn implication_suite(
    ch: &MeasurementChannel,
    ptr: &DensityMatrix,
    part: &PointerPartition,
) -> Result<ImplicationSuite> {
    let probe = DensityMatrix::maximally_mixed(part.d_s())?;
    let fixed = check_properties(ch, ptr, part, &Probe::Fixed(probe))?;
    let all_states = check_properties(ch, ptr, part, &Probe::AllStates)?;
    let mut violations = check_implications(&fixed);
    violations.extend(check_implications(&all_states));
    Ok(ImplicationSuite {
        fixed,
        all_states,
        violations,
    })
}

/// CNOT with the system as control and the pointer as target:
/// |s, n⟩ ↦ |s, n ⊕ s⟩ on two qubits.
pub fn build_cnot() -> MeasurementChannel {
    MeasurementChannel::Permutation(BasisPermutation::new(vec![0, 1, 3, 2]).unwrap())
}

/// The unbiased-but-unfaithful two-qubit example:
/// U = |00⟩⟨00| + |01⟩⟨11| + |11⟩⟨10| + |10⟩⟨01|.
pub fn build_unb() -> MeasurementChannel {
    // As a source→destination image: |00⟩→|00⟩, |01⟩→|10⟩, |10⟩→|11⟩, |11⟩→|01⟩.
    MeasurementChannel::Permutation(BasisPermutation::new(vec![0, 2, 3, 1]).unwrap())
}

/// Swap of the system and pointer qubits.
pub fn build_swap() -> MeasurementChannel {
    MeasurementChannel::Permutation(BasisPermutation::new(vec![0, 2, 1, 3]).unwrap())
}

/// The ideal measurement unitary on two d-level systems:
/// U_d = |0⟩⟨0| ⊗ 1 + Σ_{i≠0} |i⟩⟨i| ⊗ X^(i), where X^(i) swaps pointer
/// levels 0 and i and fixes the rest.
pub fn build_u_d(d: usize) -> Result<MeasurementChannel> {
    if d < 2 {
        return Err(Error::Domain("U_d needs dimension at least 2".into()));
    }
    let mut image = Vec::with_capacity(d * d);
    for i in 0..d {
        for n in 0..d {
            let dst = if i == 0 {
                n
            } else if n == 0 {
                i
            } else if n == i {
                0
            } else {
                n
            };
            image.push(i * d + dst);
        }
    }
    Ok(MeasurementChannel::Permutation(BasisPermutation::new(image)?))
}

/// The block-swap unitary V: |i⟩_S ⊗ |ψ_m^(j)⟩ ↦ |j⟩_S ⊗ |ψ_m^(i)⟩, where
/// |ψ_m^(j)⟩ is the m-th basis vector of block j. Requires equal block sizes.
pub fn block_swap_v(part: &PointerPartition) -> Result<BasisPermutation> {
    if part.basis().is_some() {
        return Err(Error::Partition(
            "block swap is defined in the partition's index basis only".into(),
        ));
    }
    let d_s = part.d_s();
    let d_p = part.d_p();
    let lam = part.equal_block_size()?;
    let mut image = vec![0usize; d_s * d_p];
    for i in 0..d_s {
        for j in 0..d_s {
            for m in 0..lam {
                image[i * d_p + part.blocks()[j][m]] = j * d_p + part.blocks()[i][m];
            }
        }
    }
    BasisPermutation::new(image)
}

/// Builds U = V·Ũ with Ũ = Σ_i |i⟩⟨i| ⊗ Ũ^(i) from dense per-outcome pointer
/// unitaries. Every channel built this way is unbiased for all system states.
pub fn compose_unbiased_unitary(
    per_outcome: &[CMatrix],
    part: &PointerPartition,
) -> Result<MeasurementChannel> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    if per_outcome.len() != d_s {
        return Err(Error::Channel(format!(
            "need {} per-outcome unitaries, got {}",
            d_s,
            per_outcome.len()
        )));
    }
    for u in per_outcome {
        if u.rows() != d_p || !u.is_unitary(STRUCT_TOL) {
            return Err(Error::Channel("per-outcome block is not a d_P unitary".into()));
        }
    }
    part.equal_block_size()?;
    let dim = d_s * d_p;
    let mut u_tilde = CMatrix::zeros(dim, dim);
    for (i, u) in per_outcome.iter().enumerate() {
        for a in 0..d_p {
            for b in 0..d_p {
                u_tilde.set(i * d_p + a, i * d_p + b, u.get(a, b));
            }
        }
    }
    let v = block_swap_v(part)?.to_dense()?;
    Ok(MeasurementChannel::Unitary(v.mul(&u_tilde)?))
}

/// Permutation-carrier variant of [`compose_unbiased_unitary`].
pub fn compose_unbiased_permutation(
    per_outcome: &[BasisPermutation],
    part: &PointerPartition,
) -> Result<MeasurementChannel> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    if per_outcome.len() != d_s {
        return Err(Error::Channel(format!(
            "need {} per-outcome permutations, got {}",
            d_s,
            per_outcome.len()
        )));
    }
    if per_outcome.iter().any(|p| p.size() != d_p) {
        return Err(Error::Channel("per-outcome permutation has wrong size".into()));
    }
    let mut image = Vec::with_capacity(d_s * d_p);
    for (i, p) in per_outcome.iter().enumerate() {
        for n in 0..d_p {
            image.push(i * d_p + p.apply_index(n));
        }
    }
    let u_tilde = BasisPermutation::new(image)?;
    let v = block_swap_v(part)?;
    Ok(MeasurementChannel::Permutation(v.compose(&u_tilde)?))
}

/// Structural verdict for a Kraus set against the block form
/// K_l = Σ_i K_l^(i), with K_l^(i) mapping the |i⟩_S source subspace into
/// the Π_i pointer image and Σ_l K_l^(i)†K_l^(i) = |i⟩⟨i| ⊗ 1_P per outcome.
#[derive(Debug, Clone)]
pub struct KrausStructureReport {
    /// Largest entry outside the allowed support pattern.
    pub support_residual: f64,
    /// Largest deviation of the per-outcome completeness sums.
    pub completeness_residual: f64,
    pub tol: f64,
}

impl KrausStructureReport {
    pub fn structured(&self) -> bool {
        self.support_residual <= self.tol && self.completeness_residual <= self.tol
    }
}

/// Validates a Kraus set against the unbiased-measurement block structure.
pub fn validate_kraus_structure(
    kraus: &[CMatrix],
    part: &PointerPartition,
) -> Result<KrausStructureReport> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    let dim = d_s * d_p;
    if kraus.is_empty() {
        return Err(Error::Channel("empty Kraus set".into()));
    }
    if kraus.iter().any(|k| k.rows() != dim || k.cols() != dim) {
        return Err(Error::Size("Kraus operator has wrong dimension".into()));
    }
    let mut comp = CMatrix::zeros(dim, dim);
    for k in kraus {
        comp = comp.add(&k.adjoint().mul(k)?)?;
    }
    if comp.max_abs_diff(&CMatrix::identity(dim)) > STRUCT_TOL {
        return Err(Error::Channel("Kraus set is not complete".into()));
    }
    // Rotate into the partition's index basis when one is attached.
    let rotated: Vec<CMatrix> = match part.basis() {
        None => kraus.to_vec(),
        Some(b) => {
            let binv = kron(&CMatrix::identity(d_s), &b.adjoint())?;
            kraus
                .iter()
                .map(|k| binv.mul(k))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let mut block_of = vec![0usize; d_p];
    for (i, block) in part.blocks().iter().enumerate() {
        for &n in block {
            block_of[n] = i;
        }
    }
    let mut support = 0.0f64;
    for k in &rotated {
        for row in 0..dim {
            let m = row % d_p;
            for col in 0..dim {
                let i = col / d_p;
                if block_of[m] != i {
                    support = support.max(k.get(row, col).norm());
                }
            }
        }
    }
    // Per-outcome completeness: Σ_l K_l^(i)†K_l^(i) restricted to the source
    // columns of outcome i must be the identity on that subspace.
    let mut completeness = 0.0f64;
    for i in 0..d_s {
        for a in 0..d_p {
            for b in 0..d_p {
                let got = comp.get(i * d_p + a, i * d_p + b);
                let want = if a == b { 1.0 } else { 0.0 };
                completeness = completeness.max((got - want).norm());
            }
        }
    }
    Ok(KrausStructureReport {
        support_residual: support,
        completeness_residual: completeness,
        tol: STRUCT_TOL,
    })
}

/// Block decomposition Ã_ji of a joint state against a partition: block
/// (j, i) is the system-j diagonal block of ρ̃ compressed onto pointer block
/// i, normalized by ρ_ii. Per-column trace sums of 1 are equivalent to
/// unbiasedness.
#[derive(Debug, Clone)]
pub struct CorrelationMatrixView {
    d_s: usize,
    /// Per-column block dimension d_i = |blocks[i]| (columns may differ when
    /// the partition is unbalanced).
    block_dims: Vec<usize>,
    /// Row-major d_S×d_S grid; `None` marks columns with ρ_ii = 0 where the
    /// normalization is undefined.
    blocks: Vec<Option<CMatrix>>,
    rho_s_diag: Vec<f64>,
    column_sums: Vec<Option<f64>>,
}

impl CorrelationMatrixView {
    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    /// The reference system diagonal the blocks were normalized by.
    pub fn rho_s_diag(&self) -> &[f64] {
        &self.rho_s_diag
    }

    /// Normalized block Ã_ji, or `None` when ρ_ii = 0.
    pub fn block(&self, j: usize, i: usize) -> Option<&CMatrix> {
        self.blocks[j * self.d_s + i].as_ref()
    }

    /// Σ_j tr[Ã_ji] for column i (1 for every i ⟺ unbiased).
    pub fn column_sum(&self, i: usize) -> Option<f64> {
        self.column_sums[i]
    }

    /// |Σ_j tr[Ã_ji] − 1| for column i.
    pub fn unbiased_residual(&self, i: usize) -> Option<f64> {
        self.column_sums[i].map(|s| (s - 1.0).abs())
    }

    /// (1/d_S)·Σ_i tr[Ã_ii]: the average correlation encoded in the view.
    pub fn average_diagonal_trace(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.d_s {
            if let Some(b) = self.block(i, i) {
                acc += b.trace().re;
            }
        }
        acc / self.d_s as f64
    }
}

/// Extracts the correlation-matrix view of a joint state.
pub fn extract_correlation_matrix(
    rho_sp: &DensityMatrix,
    part: &PointerPartition,
    rho_s_diag: &[f64],
) -> Result<CorrelationMatrixView> {
    let d_s = part.d_s();
    let d_p = part.d_p();
    if rho_sp.dim() != d_s * d_p || rho_s_diag.len() != d_s {
        return Err(Error::Size("state / partition / diagonal dimension mismatch".into()));
    }
    // Work in the partition's index basis.
    let m = match part.basis() {
        None => rho_sp.matrix().clone(),
        Some(b) => {
            let rot = kron(&CMatrix::identity(d_s), &b.adjoint())?;
            rot.mul(rho_sp.matrix())?.mul(&rot.adjoint())?
        }
    };
    let mut blocks = Vec::with_capacity(d_s * d_s);
    let mut column_sums = vec![Some(0.0f64); d_s];
    for j in 0..d_s {
        for i in 0..d_s {
            let idx = &part.blocks()[i];
            let di = idx.len();
            if rho_s_diag[i] <= STRUCT_TOL {
                blocks.push(None);
                column_sums[i] = None;
                continue;
            }
            let mut a = CMatrix::zeros(di, di);
            for (r, &mr) in idx.iter().enumerate() {
                for (c, &mc) in idx.iter().enumerate() {
                    a.set(
                        r,
                        c,
                        m.get(j * d_p + mr, j * d_p + mc) / rho_s_diag[i],
                    );
                }
            }
            if let Some(sum) = column_sums[i].as_mut() {
                *sum += a.trace().re;
            }
            blocks.push(Some(a));
        }
    }
    Ok(CorrelationMatrixView {
        d_s,
        block_dims: part.blocks().iter().map(|b| b.len()).collect(),
        blocks,
        rho_s_diag: rho_s_diag.to_vec(),
        column_sums,
    })
}

/// Random generators used by property suites and the verification command.
/// Only validity matters here, not a particular distribution.
pub mod random {
    use super::*;
    use crate::states::DensityMatrix;

    /// Standard normal via Box–Muller.
    fn gauss<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn gauss_c<R: Rng>(rng: &mut R) -> C64 {
        Complex::new(gauss(rng), gauss(rng))
    }

    /// Random full-rank density matrix ρ = GG†/tr(GG†).
    pub fn density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
        let g = CMatrix::new(
            dim,
            dim,
            (0..dim * dim).map(|_| gauss_c(rng)).collect(),
        )
        .unwrap();
        let gg = g.mul(&g.adjoint()).unwrap();
        let t = gg.trace().re;
        DensityMatrix::new(gg.scale(C64::new(1.0 / t, 0.0))).unwrap()
    }

    /// Random diagonal density matrix with strictly positive populations.
    pub fn diagonal_density<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
        let mut pops: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = pops.iter().sum();
        for p in &mut pops {
            *p /= total;
        }
        DensityMatrix::from_diagonal(&pops).unwrap()
    }

    /// Haar-like unitary: Gram-Schmidt of a complex Gaussian matrix.
    pub fn unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
        let cols = orthonormal_columns(rng, dim, dim);
        let mut u = CMatrix::zeros(dim, dim);
        for (j, col) in cols.iter().enumerate() {
            for i in 0..dim {
                u.set(i, j, col[i]);
            }
        }
        u
    }

    /// `cols` orthonormal vectors of length `rows` (rows ≥ cols).
    pub fn orthonormal_columns<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<C64>> {
        assert!(rows >= cols);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cols);
        while basis.len() < cols {
            let mut v: Vec<C64> = (0..rows).map(|_| gauss_c(rng)).collect();
            // Two rounds of modified Gram-Schmidt for numerical safety.
            for _ in 0..2 {
                for b in &basis {
                    let dot: C64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
                    for (vi, bi) in v.iter_mut().zip(b.iter()) {
                        *vi -= dot * bi;
                    }
                }
            }
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
        basis
    }

    /// Random permutation on n indices (Fisher-Yates).
    pub fn permutation<R: Rng>(rng: &mut R, n: usize) -> BasisPermutation {
        let mut image: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            image.swap(i, j);
        }
        BasisPermutation::new(image).unwrap()
    }

    /// Random ideal-form joint state Σ_i q_i |i⟩⟨i| ⊗ σ^(i) with each σ^(i)
    /// supported inside pointer block i; `sys_diag` gives the q_i.
    pub fn eq1_state<R: Rng>(
        rng: &mut R,
        part: &PointerPartition,
        sys_diag: &[f64],
    ) -> Result<DensityMatrix> {
        let d_s = part.d_s();
        let d_p = part.d_p();
        if sys_diag.len() != d_s {
            return Err(Error::Size("diagonal length mismatch".into()));
        }
        let mut m = CMatrix::zeros(d_s * d_p, d_s * d_p);
        for (i, block) in part.blocks().iter().enumerate() {
            if block.is_empty() {
                continue;
            }
            let sigma = density(rng, block.len());
            for (r, &mr) in block.iter().enumerate() {
                for (c, &mc) in block.iter().enumerate() {
                    m.set(
                        i * d_p + mr,
                        i * d_p + mc,
                        sigma.matrix().get(r, c) * sys_diag[i],
                    );
                }
            }
        }
        DensityMatrix::new(m)
    }

    /// Random Kraus set in the unbiased block form of `validate_kraus_structure`:
    /// per outcome i, a tall isometry split into `l` operators mapping the
    /// |i⟩_S source columns into the Π_i pointer image.
    pub fn lemma1_kraus<R: Rng>(
        rng: &mut R,
        part: &PointerPartition,
        l: usize,
    ) -> Result<Vec<CMatrix>> {
        let d_s = part.d_s();
        let d_p = part.d_p();
        let dim = d_s * d_p;
        if l == 0 {
            return Err(Error::Channel("need at least one Kraus operator".into()));
        }
        let mut ops = vec![CMatrix::zeros(dim, dim); l];
        for (i, block) in part.blocks().iter().enumerate() {
            let lam = block.len();
            let rows = l * d_s * lam;
            if rows < d_p {
                return Err(Error::Channel(
                    "too few Kraus operators for an isometric block".into(),
                ));
            }
            let cols = orthonormal_columns(rng, rows, d_p);
            for n in 0..d_p {
                for (r, &val) in cols[n].iter().enumerate() {
                    let which = r / (d_s * lam);
                    let rem = r % (d_s * lam);
                    let j = rem / lam;
                    let m = block[rem % lam];
                    ops[which].set(j * d_p + m, i * d_p + n, val);
                }
            }
        }
        Ok(ops)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{gibbs, SectoredSpectrum};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn thermal_qubit(p0: f64) -> DensityMatrix {
        DensityMatrix::from_diagonal(&[p0, 1.0 - p0]).unwrap()
    }

    #[test]
    fn correlation_of_perfectly_correlated_state() {
        let part = PointerPartition::singletons(2);
        let rho = DensityMatrix::basis_state(4, 0).unwrap(); // |00><00|
        assert_eq!(correlation(&rho, &part).unwrap(), 1.0);
    }

    #[test]
    fn cnot_thermal_correlation_is_inverse_z() {
        // Thermal pointer with gap E at inverse temperature β: C = p = 1/Z.
        let beta = 0.8;
        let spec = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        let (tau, w) = gibbs(&spec, beta).unwrap();
        let part = PointerPartition::singletons(2);
        let rho_s = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        let joint = kron(rho_s.matrix(), tau.matrix()).unwrap();
        let out = DensityMatrix::new(apply_channel(&build_cnot(), &joint).unwrap()).unwrap();
        assert!((correlation(&out, &part).unwrap() - 1.0 / w.z()).abs() < 1e-12);
    }

    #[test]
    fn counterexample_state_correlation() {
        // Diagonal joint state (5/8, 1/8, 1/8, 1/8): unbiased and
        // non-invasive for ρ_S = diag(3/4, 1/4) but C = 3/4.
        let part = PointerPartition::singletons(2);
        let rho = DensityMatrix::from_diagonal(&[0.625, 0.125, 0.125, 0.125]).unwrap();
        assert_eq!(correlation(&rho, &part).unwrap(), 0.75);
        let report = check_state_properties(&rho, &part, &[0.75, 0.25]).unwrap();
        assert!(report.unbiased());
        assert!(report.noninvasive());
        assert!(!report.faithful());
        assert!((report.faithful_residual - 0.25).abs() < 1e-15);
        // Fixed-state mode: no implication applies, hence no violations.
        assert!(check_implications(&report).is_empty());
    }

    #[test]
    fn cnot_pure_pointer_is_ideal() {
        let part = PointerPartition::singletons(2);
        let ptr = DensityMatrix::basis_state(2, 0).unwrap();
        let report =
            check_properties(&build_cnot(), &ptr, &part, &Probe::AllStates).unwrap();
        assert!(report.unbiased());
        assert!(report.faithful());
        assert!(report.noninvasive());
    }

    #[test]
    fn cnot_thermal_pointer_is_biased() {
        let p = 0.6;
        let part = PointerPartition::singletons(2);
        let ptr = thermal_qubit(p);
        // Fixed probes ρ00 ∈ {0, 1/2, 1}: the outcome-i residual is
        // |ρ_ii(2p−1) + 1 − p − ρ_ii|.
        for rho00 in [0.0, 0.5, 1.0] {
            let rho_s = DensityMatrix::from_diagonal(&[rho00, 1.0 - rho00]).unwrap();
            let report =
                check_properties(&build_cnot(), &ptr, &part, &Probe::Fixed(rho_s)).unwrap();
            let expect = [rho00, 1.0 - rho00]
                .iter()
                .map(|&r| (r * (2.0 * p - 1.0) + 1.0 - p - r).abs())
                .fold(0.0f64, f64::max);
            assert!((report.unbiased_residual - expect).abs() < 1e-12);
        }
        let report = check_properties(&build_cnot(), &ptr, &part, &Probe::AllStates).unwrap();
        assert!(!report.unbiased());
    }

    #[test]
    fn unb_thermal_is_unbiased_but_unfaithful() {
        let beta = 1.1;
        let spec = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        let (tau, w) = gibbs(&spec, beta).unwrap();
        let part = PointerPartition::singletons(2);
        let report = check_properties(&build_unb(), &tau, &part, &Probe::AllStates).unwrap();
        assert!(report.unbiased());
        assert!(!report.faithful());
        let c = average_correlation(&build_unb(), &tau, &part).unwrap();
        assert!((c - 1.0 / w.z()).abs() < 1e-12);
    }

    #[test]
    fn unb_applied_twice_is_a_3_cycle_squared() {
        // Compose the permutation with itself and compare against the dense
        // 4x4 matrix product.
        let p = match build_unb() {
            MeasurementChannel::Permutation(p) => p,
            _ => unreachable!(),
        };
        let twice = p.compose(&p).unwrap();
        let dense = p.to_dense().unwrap();
        let dense_twice = dense.mul(&dense).unwrap();
        assert!(twice.to_dense().unwrap().max_abs_diff(&dense_twice) < 1e-15);
        // The 3-cycle (1 2 3) squared is not the identity.
        assert_ne!(twice.image(), &[0, 1, 2, 3]);
    }

    #[test]
    fn u_d_matches_cnot_at_d2_and_is_ideal() {
        let u2 = match build_u_d(2).unwrap() {
            MeasurementChannel::Permutation(p) => p,
            _ => unreachable!(),
        };
        assert_eq!(u2.image(), &[0, 1, 3, 2]);
        for d in [2usize, 3, 4] {
            let part = PointerPartition::singletons(d);
            let ptr = DensityMatrix::basis_state(d, 0).unwrap();
            let ch = build_u_d(d).unwrap();
            let suite = implication_suite(&ch, &ptr, &part).unwrap();
            assert!(suite.all_states.faithful());
            assert!(suite.violations.is_empty());
        }
    }

    #[test]
    fn cnot_reproduces_ideal_joint_state() {
        // U_CNOT (ρ_S ⊗ |0><0|) U_CNOT† = Σ_ij ρ_ij |ii><jj|.
        let rho = CMatrix::new(
            2,
            2,
            vec![
                C64::new(0.6, 0.0),
                C64::new(0.2, 0.1),
                C64::new(0.2, -0.1),
                C64::new(0.4, 0.0),
            ],
        )
        .unwrap();
        let ptr = DensityMatrix::basis_state(2, 0).unwrap();
        let joint = kron(&rho, ptr.matrix()).unwrap();
        let out = apply_channel(&build_cnot(), &joint).unwrap();
        let mut expect = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                expect.set(3 * i, 3 * j, rho.get(i, j)); // |ii> has index 3i
            }
        }
        assert!(out.max_abs_diff(&expect) < 1e-15);
        // Post-measurement system state is the dephased input.
        let red = partial_trace(&out, (2, 2), Keep::A).unwrap();
        let dephased = CMatrix::from_diag(&[0.6, 0.4]);
        assert!(red.max_abs_diff(&dephased) < 1e-15);
    }

    #[test]
    fn composed_channels_are_unbiased_for_all_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let part = PointerPartition::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let spec = SectoredSpectrum::new(vec![0.0, 0.5, 1.0, 1.5], 2).unwrap();
        let (tau, _) = gibbs(&spec, 0.9).unwrap();
        // Identity blocks: U = V alone.
        let ident = vec![CMatrix::identity(4), CMatrix::identity(4)];
        let ch = compose_unbiased_unitary(&ident, &part).unwrap();
        let report = check_properties(&ch, &tau, &part, &Probe::AllStates).unwrap();
        assert!(report.unbiased_residual < 1e-12);
        // Random per-outcome unitaries stay unbiased.
        for _ in 0..5 {
            let blocks = vec![random::unitary(&mut rng, 4), random::unitary(&mut rng, 4)];
            let ch = compose_unbiased_unitary(&blocks, &part).unwrap();
            let report = check_properties(&ch, &tau, &part, &Probe::AllStates).unwrap();
            assert!(report.unbiased_residual < 1e-12);
        }
        // Permutation carrier agrees with the dense path.
        let perms = vec![
            random::permutation(&mut rng, 4),
            random::permutation(&mut rng, 4),
        ];
        let fast = compose_unbiased_permutation(&perms, &part).unwrap();
        let dense_blocks: Vec<CMatrix> =
            perms.iter().map(|p| p.to_dense().unwrap()).collect();
        let dense = compose_unbiased_unitary(&dense_blocks, &part).unwrap();
        let fast_u = fast.dense_unitary().unwrap().unwrap();
        let dense_u = dense.dense_unitary().unwrap().unwrap();
        assert!(fast_u.max_abs_diff(&dense_u) < 1e-12);
    }

    #[test]
    fn compose_rejects_unequal_blocks() {
        let part = PointerPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let blocks = vec![CMatrix::identity(3), CMatrix::identity(3)];
        assert!(matches!(
            compose_unbiased_unitary(&blocks, &part),
            Err(Error::Rank(_))
        ));
    }

    #[test]
    fn kraus_structure_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let part = PointerPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        // A Lemma-2-style unitary is a single structured Kraus operator.
        let perms = vec![
            random::permutation(&mut rng, 4),
            random::permutation(&mut rng, 4),
        ];
        let ch = compose_unbiased_permutation(&perms, &part).unwrap();
        let u = ch.dense_unitary().unwrap().unwrap();
        let report = validate_kraus_structure(&[u], &part).unwrap();
        assert!(report.structured());
        // U_CNOT against singleton projectors is complete but unstructured.
        let part2 = PointerPartition::singletons(2);
        let cnot = build_cnot().dense_unitary().unwrap().unwrap();
        let report = validate_kraus_structure(&[cnot], &part2).unwrap();
        assert!(!report.structured());
        // Randomly generated block-form Kraus sets validate and the induced
        // channel is unbiased for all states.
        for l in [1usize, 2, 3] {
            let ks = random::lemma1_kraus(&mut rng, &part, l).unwrap();
            let report = validate_kraus_structure(&ks, &part).unwrap();
            assert!(report.structured(), "l={l}");
            let spec = SectoredSpectrum::new(vec![0.0, 0.4, 0.9, 1.3], 2).unwrap();
            let (tau, _) = gibbs(&spec, 1.2).unwrap();
            let ch = MeasurementChannel::Kraus(ks);
            let rep = check_properties(&ch, &tau, &part, &Probe::AllStates).unwrap();
            assert!(rep.unbiased_residual < 1e-10, "l={l}: {}", rep.unbiased_residual);
        }
    }

    #[test]
    fn correlation_matrix_of_ideal_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let part = PointerPartition::new(6, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let diag = [0.35, 0.65];
        let rho = random::eq1_state(&mut rng, &part, &diag).unwrap();
        let view = extract_correlation_matrix(&rho, &part, &diag).unwrap();
        for i in 0..2 {
            assert!(view.unbiased_residual(i).unwrap() < 1e-12);
            assert!((view.block(i, i).unwrap().trace().re - 1.0).abs() < 1e-12);
            let j = 1 - i;
            assert!(view.block(j, i).unwrap().trace().norm() < 1e-12);
        }
        assert_eq!(view.block_dims(), &[3, 3]);
    }

    #[test]
    fn correlation_matrix_flags_zero_population() {
        let part = PointerPartition::singletons(2);
        let rho = DensityMatrix::basis_state(4, 0).unwrap();
        let view = extract_correlation_matrix(&rho, &part, &[1.0, 0.0]).unwrap();
        assert!(view.block(0, 0).is_some());
        assert!(view.block(0, 1).is_none());
        assert!(view.column_sum(1).is_none());
    }

    #[test]
    fn cnot_thermal_column_sums_reproduce_bias() {
        let p = 0.6;
        let part = PointerPartition::singletons(2);
        let ptr = thermal_qubit(p);
        let rho_s = [0.3, 0.7];
        let joint = kron(&CMatrix::from_diag(&rho_s), ptr.matrix()).unwrap();
        let out = DensityMatrix::new(apply_channel(&build_cnot(), &joint).unwrap()).unwrap();
        let view = extract_correlation_matrix(&out, &part, &rho_s).unwrap();
        for i in 0..2 {
            // Outcome probability is ρ_ii(2p−1)+1−p; the column sum is that
            // divided by ρ_ii.
            let prob = rho_s[i] * (2.0 * p - 1.0) + 1.0 - p;
            let expect = prob / rho_s[i];
            assert!((view.column_sum(i).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn average_correlation_is_definition_identity() {
        // For any channel, C̄ equals the correlation at ρ_S = 1/d_S ⊗ ptr.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let part = PointerPartition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let ptr = random::density(&mut rng, 4);
        let blocks = vec![random::unitary(&mut rng, 4), random::unitary(&mut rng, 4)];
        let ch = compose_unbiased_unitary(&blocks, &part).unwrap();
        let cbar = average_correlation(&ch, &ptr, &part).unwrap();
        let joint = kron(
            DensityMatrix::maximally_mixed(2).unwrap().matrix(),
            ptr.matrix(),
        )
        .unwrap();
        let out = DensityMatrix::new(apply_channel(&ch, &joint).unwrap()).unwrap();
        assert!((cbar - correlation(&out, &part).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn swap_channel_average_correlation() {
        // Swapping system and pointer makes the outcome the pointer's initial
        // state: at ρ_S = 1/2 the correlation is the pointer ground weight
        // for outcome 0 plus excited weight for outcome 1, halved twice over.
        let part = PointerPartition::singletons(2);
        let ptr = thermal_qubit(0.8);
        let c = average_correlation(&build_swap(), &ptr, &part).unwrap();
        // Direct evaluation: outcome i requires both system-out (= pointer-in)
        // and pointer-out (= system-in = 1/2) to be i.
        let expect = 0.5 * 0.8 + 0.5 * 0.2;
        assert!((c - expect).abs() < 1e-12);
    }

    #[test]
    fn partition_validation() {
        assert!(PointerPartition::new(4, vec![vec![0, 1], vec![2]]).is_err());
        assert!(PointerPartition::new(4, vec![vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(PointerPartition::new(4, vec![vec![0, 1], vec![2, 3]]).is_ok());
    }

    #[test]
    fn rotated_partition_projectors() {
        // A partition with a change-of-basis unitary produces rotated
        // projectors that still resolve the identity.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random::unitary(&mut rng, 4);
        let part = PointerPartition::new(4, vec![vec![0, 1], vec![2, 3]])
            .unwrap()
            .with_basis(b)
            .unwrap();
        let sum = part.projector(0).unwrap().add(&part.projector(1).unwrap()).unwrap();
        assert!(sum.max_abs_diff(&CMatrix::identity(4)) < 1e-10);
    }
}
