//! Hamiltonian spectra with sector ordering, Gibbs states, tensor powers of
//! thermal qubits, and energy expectation values.
//!
//! Spectra are the canonical Hamiltonian representation; dense diagonal
//! Hamiltonian matrices are derived views. All energies are dimensionless
//! multiples of a caller-chosen reference (ħ = k_B = 1).

use crate::error::{Error, Result};
use crate::qmat::{CMatrix, C64, STRUCT_TOL};

/// Relative tolerance used to group degenerate ground levels at β = +∞.
const DEGENERACY_TOL: f64 = 1e-12;

/// An ordered energy spectrum, optionally viewed as d_S sectors of equal
/// size d_P/d_S: E_i^(k) = energies[k·sector_size + i].
///
/// [`SectoredSpectrum::new`] canonicalizes to non-decreasing order with a
/// stable sort (degenerate levels keep their input order);
/// [`SectoredSpectrum::from_product_order`] preserves the given order, which
/// is how joint system+pointer Hamiltonians keep the tensor-product basis
/// layout for energy accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct SectoredSpectrum {
    energies: Vec<f64>,
    d_s: usize,
}

impl SectoredSpectrum {
    /// Sorted (canonical) spectrum with `d_s` sectors.
    pub fn new(mut energies: Vec<f64>, d_s: usize) -> Result<Self> {
        Self::validate(&energies, d_s)?;
        // Stable sort keeps the original order among degenerate levels.
        energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(SectoredSpectrum { energies, d_s })
    }

    /// Spectrum kept in the caller's (e.g. tensor-product) order.
    pub fn from_product_order(energies: Vec<f64>, d_s: usize) -> Result<Self> {
        Self::validate(&energies, d_s)?;
        Ok(SectoredSpectrum { energies, d_s })
    }

    fn validate(energies: &[f64], d_s: usize) -> Result<()> {
        if energies.is_empty() {
            return Err(Error::Domain("empty spectrum".into()));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain("non-finite energy level".into()));
        }
        if d_s == 0 {
            return Err(Error::Domain("sector count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    /// Sector size d_P/d_S; errors when the dimension is not divisible.
    pub fn sector_size(&self) -> Result<usize> {
        if self.energies.len() % self.d_s != 0 {
            return Err(Error::Rank(format!(
                "dimension {} not divisible into {} sectors",
                self.energies.len(),
                self.d_s
            )));
        }
        Ok(self.energies.len() / self.d_s)
    }

    /// E_i^(k), the i-th energy of sector k (requires sorted order to be
    /// meaningful; valid on any spectrum as a raw index accessor).
    pub fn sector_energy(&self, k: usize, i: usize) -> Result<f64> {
        let lam = self.sector_size()?;
        Ok(self.energies[k * lam + i])
    }

    pub fn is_sorted(&self) -> bool {
        self.energies.windows(2).all(|w| w[0] <= w[1])
    }

    /// Sorted view of this spectrum (identity when already canonical).
    pub fn sorted(&self) -> SectoredSpectrum {
        let mut energies = self.energies.clone();
        energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        SectoredSpectrum {
            energies,
            d_s: self.d_s,
        }
    }

    pub fn min_energy(&self) -> f64 {
        self.energies.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Dense diagonal Hamiltonian in this spectrum's basis order.
    pub fn to_dense_hamiltonian(&self) -> CMatrix {
        CMatrix::from_diag(&self.energies)
    }
}

/// Boltzmann weights p_i = exp(−βE_i)/Z along a spectrum's basis order.
///
/// `z` is computed with energies shifted by the ground energy
/// (z = Σ exp(−β(E_i − E_0))), which equals the usual partition function
/// whenever the ground energy is 0. At β = +∞ the weights are uniform on
/// the degenerate ground subspace and `z` is its multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalWeights {
    beta: f64,
    weights: Vec<f64>,
    z: f64,
}

impl ThermalWeights {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Sums of weights per sector, in sector order.
    pub fn sector_sums(&self, d_s: usize) -> Result<Vec<f64>> {
        if self.weights.len() % d_s != 0 {
            return Err(Error::Rank(format!(
                "{} weights not divisible into {} sectors",
                self.weights.len(),
                d_s
            )));
        }
        let lam = self.weights.len() / d_s;
        Ok(self
            .weights
            .chunks(lam)
            .map(|c| c.iter().sum())
            .collect())
    }
}

/// Dense complex Hermitian unit-trace PSD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace to 1e-10 and positive
    /// semidefiniteness via an eigenvalue floor of −1e-10.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Size("density matrix must be square".into()));
        }
        if !matrix.is_hermitian(STRUCT_TOL) {
            return Err(Error::Domain("density matrix is not Hermitian".into()));
        }
        if (matrix.trace() - C64::new(1.0, 0.0)).norm() > STRUCT_TOL {
            return Err(Error::Domain("density matrix trace is not 1".into()));
        }
        let diag_only = Self::is_diagonal(&matrix);
        if diag_only {
            for i in 0..matrix.rows() {
                if matrix.get(i, i).re < -STRUCT_TOL {
                    return Err(Error::Domain("negative population on the diagonal".into()));
                }
            }
        } else {
            let min = matrix
                .hermitian_eigenvalues()?
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if min < -STRUCT_TOL {
                return Err(Error::Domain(format!(
                    "density matrix has negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(DensityMatrix { matrix })
    }

    fn is_diagonal(m: &CMatrix) -> bool {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if i != j && m.get(i, j).norm() > STRUCT_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// Diagonal density matrix from populations (must sum to 1 within 1e-10).
    pub fn from_diagonal(populations: &[f64]) -> Result<Self> {
        Self::new(CMatrix::from_diag(populations))
    }

    /// |k⟩⟨k| in a `dim`-dimensional space.
    pub fn basis_state(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Domain(format!("basis index {k} out of range {dim}")));
        }
        let mut pops = vec![0.0; dim];
        pops[k] = 1.0;
        Self::from_diagonal(&pops)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::from_diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Real parts of the diagonal (the populations).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix.get(i, i).re).collect()
    }
}

/// Gibbs state τ(β) of a spectrum, diagonal in the spectrum's basis order,
/// together with its Boltzmann weights.
///
/// β = +∞ is handled symbolically: uniform weight on the minimal-energy
/// degenerate subspace, never through float overflow.
pub fn gibbs(spec: &SectoredSpectrum, beta: f64) -> Result<(DensityMatrix, ThermalWeights)> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::Domain(format!("inverse temperature {beta} out of range")));
    }
    let e0 = spec.min_energy();
    let weights: Vec<f64>;
    let z: f64;
    if beta.is_infinite() {
        let scale = 1.0 + e0.abs();
        let ground: Vec<bool> = spec
            .energies()
            .iter()
            .map(|&e| (e - e0) <= DEGENERACY_TOL * scale)
            .collect();
        let g = ground.iter().filter(|&&b| b).count() as f64;
        weights = ground
            .iter()
            .map(|&b| if b { 1.0 / g } else { 0.0 })
            .collect();
        z = g;
    } else {
        let unnorm: Vec<f64> = spec
            .energies()
            .iter()
            .map(|&e| (-(beta * (e - e0))).exp())
            .collect();
        z = unnorm.iter().sum();
        weights = unnorm.into_iter().map(|w| w / z).collect();
    }
    let rho = DensityMatrix::from_diagonal(&weights)?;
    Ok((
        rho,
        ThermalWeights {
            beta,
            weights,
            z,
        },
    ))
}

/// N-qubit pointer spectrum: level k·E_P with multiplicity C(N, k), sorted,
/// length 2^N, with two sectors (d_S = 2).
pub fn qubit_pointer_spectrum(n: u32, e_p: f64) -> Result<SectoredSpectrum> {
    if n == 0 {
        return Err(Error::Domain("pointer must have at least one qubit".into()));
    }
    if n > 20 {
        return Err(Error::Size(format!("2^{n} pointer levels beyond supported range")));
    }
    let mut energies = Vec::with_capacity(1usize << n);
    for k in 0..=n {
        let mult = binomial(n, k) as usize;
        energies.extend(std::iter::repeat(k as f64 * e_p).take(mult));
    }
    SectoredSpectrum::new(energies, 2)
}

/// tr(Hρ) with H diagonal in the spectrum's basis order.
pub fn energy(rho: &DensityMatrix, spec: &SectoredSpectrum) -> Result<f64> {
    if rho.dim() != spec.dim() {
        return Err(Error::Size(format!(
            "state dim {} vs spectrum dim {}",
            rho.dim(),
            spec.dim()
        )));
    }
    Ok(rho
        .diagonal()
        .iter()
        .zip(spec.energies())
        .map(|(p, e)| p * e)
        .sum())
}

/// H_SP = H_S ⊗ 1_P + 1_S ⊗ H_P in tensor-product basis order (system-major):
/// level j·d_P + n has energy E_S,j + E_P,n. Sector j of the result is the
/// system level j, so `d_s` of the output equals dim(sys). Use `.sorted()`
/// for the canonical view.
pub fn joint_hamiltonian(sys: &SectoredSpectrum, ptr: &SectoredSpectrum) -> SectoredSpectrum {
    let mut energies = Vec::with_capacity(sys.dim() * ptr.dim());
    for &es in sys.energies() {
        for &ep in ptr.energies() {
            energies.push(es + ep);
        }
    }
    SectoredSpectrum::from_product_order(energies, sys.dim())
        .expect("joint spectrum of valid spectra is valid")
}

/// Binomial coefficient C(n, k) as f64 (exact for the ranges used here).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmat::kron;

    #[test]
    fn gibbs_infinite_temperature_qubit() {
        let spec = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        let (rho, w) = gibbs(&spec, 0.0).unwrap();
        assert!((rho.diagonal()[0] - 0.5).abs() < 1e-15);
        assert!((rho.diagonal()[1] - 0.5).abs() < 1e-15);
        assert!((w.z() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gibbs_finite_beta_qubit() {
        let e_p = 1.0;
        let beta = 0.7;
        let spec = SectoredSpectrum::new(vec![0.0, e_p], 2).unwrap();
        let (rho, w) = gibbs(&spec, beta).unwrap();
        let z = 1.0 + (-beta * e_p).exp();
        assert!((w.z() - z).abs() < 1e-14);
        assert!((rho.diagonal()[0] - 1.0 / z).abs() < 1e-14);
        assert!((rho.diagonal()[1] - (-beta * e_p).exp() / z).abs() < 1e-14);
    }

    #[test]
    fn gibbs_beta_infinity_unique_ground() {
        let spec = qubit_pointer_spectrum(2, 1.0).unwrap();
        let (rho, _) = gibbs(&spec, f64::INFINITY).unwrap();
        assert_eq!(rho.diagonal(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn gibbs_beta_infinity_degenerate_ground() {
        let spec = SectoredSpectrum::new(vec![2.0, 2.0, 5.0], 3).unwrap();
        let (rho, w) = gibbs(&spec, f64::INFINITY).unwrap();
        assert_eq!(rho.diagonal(), vec![0.5, 0.5, 0.0]);
        assert_eq!(w.z(), 2.0);
    }

    #[test]
    fn gibbs_weights_non_increasing_and_normalized() {
        let spec = SectoredSpectrum::new(vec![0.3, 0.1, 2.0, 1.5, 0.1, 0.9], 2).unwrap();
        for beta in [0.0, 0.3, 1.0, 7.5] {
            let (_, w) = gibbs(&spec, beta).unwrap();
            let total: f64 = w.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(w.weights().windows(2).all(|p| p[0] >= p[1] - 1e-15));
        }
    }

    #[test]
    fn gibbs_rejects_negative_beta_and_empty_spectrum() {
        let spec = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        assert!(gibbs(&spec, -1.0).is_err());
        assert!(SectoredSpectrum::new(vec![], 2).is_err());
    }

    #[test]
    fn qubit_pointer_spectrum_n3() {
        let spec = qubit_pointer_spectrum(3, 1.0).unwrap();
        assert_eq!(spec.energies(), &[0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn qubit_pointer_spectrum_n1_and_n6() {
        assert_eq!(qubit_pointer_spectrum(1, 2.5).unwrap().energies(), &[0.0, 2.5]);
        let spec = qubit_pointer_spectrum(6, 1.0).unwrap();
        assert_eq!(spec.dim(), 64);
        // Level multiplicities follow the binomial expansion of (1+x)^6.
        for k in 0..=6u32 {
            let count = spec.energies().iter().filter(|&&e| e == k as f64).count();
            assert_eq!(count as f64, binomial(6, k));
        }
    }

    #[test]
    fn energy_expectations() {
        let spec = SectoredSpectrum::new(vec![0.0, 2.0], 2).unwrap();
        let ground = DensityMatrix::basis_state(2, 0).unwrap();
        assert_eq!(energy(&ground, &spec).unwrap(), 0.0);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((energy(&mixed, &spec).unwrap() - 1.0).abs() < 1e-15);
        // Thermal average of a gapped qubit: E_P e^{-βE_P}/Z.
        let beta = 0.9;
        let (tau, w) = gibbs(&spec, beta).unwrap();
        let expect = 2.0 * (-beta * 2.0).exp() / w.z();
        assert!((energy(&tau, &spec).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn joint_hamiltonian_product_order() {
        let a = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        let j = joint_hamiltonian(&a, &a);
        assert_eq!(j.energies(), &[0.0, 1.0, 1.0, 2.0]);
        let trivial = SectoredSpectrum::new(vec![0.0], 1).unwrap();
        let ptr = SectoredSpectrum::new(vec![0.2, 0.9, 1.4], 3).unwrap();
        assert_eq!(joint_hamiltonian(&trivial, &ptr).energies(), ptr.energies());
    }

    #[test]
    fn joint_hamiltonian_matches_nested_loop() {
        let sys = SectoredSpectrum::new(vec![0.0, 0.7], 2).unwrap();
        let ptr = qubit_pointer_spectrum(2, 1.0).unwrap();
        let j = joint_hamiltonian(&sys, &ptr);
        let mut expect = vec![];
        for &es in sys.energies() {
            for &ep in ptr.energies() {
                expect.push(es + ep);
            }
        }
        assert_eq!(j.energies(), expect.as_slice());
        assert_eq!(j.dim(), 8);
    }

    #[test]
    fn tensor_power_of_thermal_qubit_matches_joint_gibbs() {
        // τ(β)^{⊗3} of a single qubit equals the Gibbs state of the 3-qubit
        // joint spectrum up to basis reordering: compare sorted weights.
        let beta = 1.3;
        let qubit = SectoredSpectrum::new(vec![0.0, 1.0], 2).unwrap();
        let (tau, _) = gibbs(&qubit, beta).unwrap();
        let t2 = kron(tau.matrix(), tau.matrix()).unwrap();
        let t3 = kron(&t2, tau.matrix()).unwrap();
        let mut pow: Vec<f64> = (0..8).map(|i| t3.get(i, i).re).collect();
        let spec3 = qubit_pointer_spectrum(3, 1.0).unwrap();
        let (_, w) = gibbs(&spec3, beta).unwrap();
        let mut joint = w.weights().to_vec();
        pow.sort_by(|a, b| a.partial_cmp(b).unwrap());
        joint.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in pow.iter().zip(joint.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::from_diagonal(&[0.6, 0.4]).is_ok());
        assert!(DensityMatrix::from_diagonal(&[0.6, 0.6]).is_err());
        assert!(DensityMatrix::from_diagonal(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(10, 0), 1.0);
        assert_eq!(binomial(5, 7), 0.0);
    }
}
