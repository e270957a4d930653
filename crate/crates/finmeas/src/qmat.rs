//! Minimal dense complex-matrix kernel.
//!
//! Products, adjoints, tensor products, partial traces, permutation
//! application, and tolerance-based structural predicates. Everything here
//! is a pure function over immutable values; no global state.
//!
//! Dense materialization is capped at total dimension [`DENSE_CAP`]; the
//! constructions of interest are permutations in the energy eigenbasis, so
//! larger instances stay on the sparse permutation carrier.

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Absolute tolerance for structural predicates (Hermitian, unitary, trace-one).
pub const STRUCT_TOL: f64 = 1e-10;

/// Largest total dimension for which dense matrices may be materialized.
pub const DENSE_CAP: usize = 4096;

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Size(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, C64::new(d, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::Size(format!(
                "product {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Size("sum of mismatched shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        CMatrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Size("difference of mismatched shapes".into()));
        }
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        CMatrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Largest entrywise absolute difference to `rhs`.
    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(rhs.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in i..self.cols {
                if (self.get(i, j) - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let prod = match self.mul(&self.adjoint()) {
            Ok(p) => p,
            Err(_) => return false,
        };
        prod.max_abs_diff(&CMatrix::identity(self.rows)) <= tol
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    ///
    /// Cyclic Jacobi on the real-symmetric embedding [[A, -B], [B, A]] of
    /// H = A + iB; the embedding's spectrum is that of H, doubled.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::Size("eigenvalues of non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(vec![]);
        }
        let m = 2 * n;
        let mut s = vec![0.0f64; m * m];
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                s[i * m + j] = z.re;
                s[(i + n) * m + (j + n)] = z.re;
                s[i * m + (j + n)] = -z.im;
                s[(i + n) * m + j] = z.im;
            }
        }
        let scale = self.max_abs().max(1.0);
        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for p in 0..m {
                for q in (p + 1)..m {
                    off = off.max(s[p * m + q].abs());
                }
            }
            if off <= 1e-14 * scale {
                break;
            }
            for p in 0..m {
                for q in (p + 1)..m {
                    let apq = s[p * m + q];
                    if apq.abs() <= 1e-15 * scale {
                        continue;
                    }
                    let app = s[p * m + p];
                    let aqq = s[q * m + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..m {
                        let skp = s[k * m + p];
                        let skq = s[k * m + q];
                        s[k * m + p] = c * skp - sn * skq;
                        s[k * m + q] = sn * skp + c * skq;
                    }
                    for k in 0..m {
                        let spk = s[p * m + k];
                        let sqk = s[q * m + k];
                        s[p * m + k] = c * spk - sn * sqk;
                        s[q * m + k] = sn * spk + c * sqk;
                    }
                }
            }
        }
        let mut evals: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
        evals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Each eigenvalue of H shows up twice in the embedding; take every other.
        Ok(evals.into_iter().step_by(2).collect())
    }
}

/// Tensor (Kronecker) product. Output entry ((i·p + k), (j·q + l)) = a(i,j)·b(k,l).
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let rows = a.rows() * b.rows();
    let cols = a.cols() * b.cols();
    if rows > DENSE_CAP || cols > DENSE_CAP {
        return Err(Error::Size(format!(
            "tensor product dimension {}x{} exceeds dense cap {}",
            rows, cols, DENSE_CAP
        )));
    }
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            let aij = a.get(i, j);
            if aij.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..b.rows() {
                for l in 0..b.cols() {
                    out.set(i * b.rows() + k, j * b.cols() + l, aij * b.get(k, l));
                }
            }
        }
    }
    Ok(out)
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Trace over one factor of a (d_A·d_B)-dimensional square matrix.
pub fn partial_trace(m: &CMatrix, dims: (usize, usize), keep: Keep) -> Result<CMatrix> {
    let (da, db) = dims;
    if !m.is_square() || m.rows() != da * db {
        return Err(Error::Size(format!(
            "partial trace of {}x{} with factor dims ({}, {})",
            m.rows(),
            m.cols(),
            da,
            db
        )));
    }
    match keep {
        Keep::A => {
            let mut out = CMatrix::zeros(da, da);
            for i in 0..da {
                for j in 0..da {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..db {
                        acc += m.get(i * db + k, j * db + k);
                    }
                    out.set(i, j, acc);
                }
            }
            Ok(out)
        }
        Keep::B => {
            let mut out = CMatrix::zeros(db, db);
            for k in 0..db {
                for l in 0..db {
                    let mut acc = C64::new(0.0, 0.0);
                    for i in 0..da {
                        acc += m.get(i * db + k, i * db + l);
                    }
                    out.set(k, l, acc);
                }
            }
            Ok(out)
        }
    }
}

/// Basis permutation acting as the sparse carrier of a permutation unitary:
/// the unitary maps basis vector |j⟩ to |image[j]⟩.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisPermutation {
    image: Vec<usize>,
}

impl BasisPermutation {
    pub fn new(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &j in &image {
            if j >= n || seen[j] {
                return Err(Error::Domain("image is not a bijection on [0, size)".into()));
            }
            seen[j] = true;
        }
        Ok(BasisPermutation { image })
    }

    pub fn identity(n: usize) -> Self {
        BasisPermutation {
            image: (0..n).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.image.len()
    }

    #[inline]
    pub fn apply_index(&self, j: usize) -> usize {
        self.image[j]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &BasisPermutation) -> Result<BasisPermutation> {
        if self.size() != other.size() {
            return Err(Error::Size("composition of mismatched permutations".into()));
        }
        BasisPermutation::new(other.image.iter().map(|&j| self.image[j]).collect())
    }

    pub fn inverse(&self) -> BasisPermutation {
        let mut inv = vec![0usize; self.size()];
        for (j, &k) in self.image.iter().enumerate() {
            inv[k] = j;
        }
        BasisPermutation { image: inv }
    }

    /// Dense 0/1 materialization M with M[image[j], j] = 1.
    pub fn to_dense(&self) -> Result<CMatrix> {
        let n = self.size();
        if n > DENSE_CAP {
            return Err(Error::Size(format!(
                "permutation dimension {} exceeds dense cap {}",
                n, DENSE_CAP
            )));
        }
        let mut m = CMatrix::zeros(n, n);
        for (j, &i) in self.image.iter().enumerate() {
            m.set(i, j, C64::new(1.0, 0.0));
        }
        Ok(m)
    }

    /// Conjugation ρ ↦ PρP†, i.e. entry (i, j) moves to (image[i], image[j]).
    pub fn conjugate_matrix(&self, rho: &CMatrix) -> Result<CMatrix> {
        if !rho.is_square() || rho.rows() != self.size() {
            return Err(Error::Size("permutation/matrix dimension mismatch".into()));
        }
        let n = self.size();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(self.image[i], self.image[j], rho.get(i, j));
            }
        }
        Ok(out)
    }
}

/// A correlating map: permutation in the product energy basis, dense
/// unitary, or a Kraus operator set.
#[derive(Debug, Clone)]
pub enum MeasurementChannel {
    Permutation(BasisPermutation),
    Unitary(CMatrix),
    Kraus(Vec<CMatrix>),
}

impl MeasurementChannel {
    pub fn dim(&self) -> usize {
        match self {
            MeasurementChannel::Permutation(p) => p.size(),
            MeasurementChannel::Unitary(u) => u.rows(),
            MeasurementChannel::Kraus(ks) => ks.first().map(|k| k.rows()).unwrap_or(0),
        }
    }

    /// Dense unitary representation, when the channel is unitary.
    pub fn dense_unitary(&self) -> Result<Option<CMatrix>> {
        match self {
            MeasurementChannel::Permutation(p) => Ok(Some(p.to_dense()?)),
            MeasurementChannel::Unitary(u) => Ok(Some(u.clone())),
            MeasurementChannel::Kraus(_) => Ok(None),
        }
    }
}

/// Applies the channel to a (not necessarily Hermitian) matrix: UρU† for the
/// unitary variants, Σ KρK† for the Kraus variant.
pub fn apply_channel(ch: &MeasurementChannel, rho: &CMatrix) -> Result<CMatrix> {
    if !rho.is_square() || rho.rows() != ch.dim() {
        return Err(Error::Size(format!(
            "channel dim {} applied to {}x{} matrix",
            ch.dim(),
            rho.rows(),
            rho.cols()
        )));
    }
    match ch {
        MeasurementChannel::Permutation(p) => p.conjugate_matrix(rho),
        MeasurementChannel::Unitary(u) => {
            if !u.is_unitary(STRUCT_TOL) {
                return Err(Error::Channel("matrix is not unitary".into()));
            }
            u.mul(rho)?.mul(&u.adjoint())
        }
        MeasurementChannel::Kraus(ks) => {
            if ks.is_empty() {
                return Err(Error::Channel("empty Kraus set".into()));
            }
            let n = ch.dim();
            let mut comp = CMatrix::zeros(n, n);
            for k in ks {
                comp = comp.add(&k.adjoint().mul(k)?)?;
            }
            if comp.max_abs_diff(&CMatrix::identity(n)) > STRUCT_TOL {
                return Err(Error::Channel("Kraus set is not complete".into()));
            }
            let mut out = CMatrix::zeros(n, n);
            for k in ks {
                out = out.add(&k.mul(rho)?.mul(&k.adjoint())?)?;
            }
            Ok(out)
        }
    }
}
