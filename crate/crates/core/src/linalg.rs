//! Dense linear algebra over the GNS Hilbert space of `n x n` complex matrices.
//!
//! Everything here uses the normalized trace `tau(A) = tr(A) / n`, so the
//! identity has `tau(1) = 1` and density matrices carry ordinary trace `n`.
//! Superoperators are represented in the orthonormal basis
//! `{ sqrt(n) E_kl }` ordered row-major; in that basis the coefficient vector
//! of `A` is `vec(A) / sqrt(n)`, so the scale cancels in the matrix of any
//! linear map and adjoints are conjugate transposes.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QotError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Absolute asymmetry tolerated when accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Relative gap below which neighbouring eigenvalues share one projection.
pub const CLUSTER_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(QotError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Normalized trace `tr(M) / n`.
pub fn ntrace(m: &CMatrix) -> Result<C64> {
    let n = check_square(m)?;
    if n == 0 {
        return Err(QotError::Dimension("empty matrix".into()));
    }
    Ok(m.trace() / n as f64)
}

/// GNS inner product `tau(A* B)`, conjugate-linear in the first argument.
pub fn gns_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(QotError::Dimension(format!(
            "inner product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    check_square(a)?;
    Ok(gns_inner_unchecked(a, b))
}

/// `tau(A* B)` without shape checks.
#[inline]
pub(crate) fn gns_inner_unchecked(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc / a.nrows() as f64
}

/// `tau(A B)` without shape checks.
#[inline]
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc / n as f64
}

/// Largest absolute entry of `M - M*`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A self-adjoint matrix. The stored entries are exactly Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Accepts `m` if its asymmetry is within [`HERMITIAN_TOL`] (relative to
    /// the entry scale when that exceeds one), and symmetrizes it.
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let asym = asymmetry(&m);
        if asym > HERMITIAN_TOL * scale {
            return Err(QotError::NotHermitian(asym));
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Wraps the Hermitian part of `m` without a tolerance check.
    pub(crate) fn from_hermitian_part(m: &CMatrix) -> Self {
        Self(hermitian_part(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| if i == j { c(diag[i]) } else { c(0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Real normalized trace.
    pub fn ntrace(&self) -> f64 {
        self.0.trace().re / self.dim() as f64
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    /// Diagonal entries (real parts).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.0[(i, j)].norm() <= tol))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        EigenBasis::of(&self.0).values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Density with normalized trace one (ordinary trace `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

/// Tolerance on the normalized trace of a density.
pub const TRACE_TOL: f64 = 1e-9;

impl DensityMatrix {
    /// Accepts a positive semidefinite matrix with `tau(rho) = 1`.
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.ntrace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(QotError::Domain(format!(
                "density must have normalized trace 1, got {tr}"
            )));
        }
        let lam = h.min_eigenvalue();
        if lam < -1e-12 {
            return Err(QotError::Domain(format!(
                "density has negative eigenvalue {lam:.3e}"
            )));
        }
        Ok(Self(h))
    }

    /// Accepts only invertible densities.
    pub fn strictly_positive(h: HermitianMatrix) -> Result<Self> {
        let d = Self::new(h)?;
        let lam = d.min_eigenvalue();
        if lam <= 0.0 {
            return Err(QotError::Precondition(format!(
                "density is singular (smallest eigenvalue {lam:.3e})"
            )));
        }
        Ok(d)
    }

    /// Rescales a physicists' density (`tr = 1`) to the normalized convention.
    pub fn from_unit_trace(h: HermitianMatrix) -> Result<Self> {
        let n = h.dim() as f64;
        Self::new(h.scale(n))
    }

    /// `diag(d) ` for `d` summing to `n`.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_real_diagonal(diag))
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(HermitianMatrix::identity(n))
    }

    pub(crate) fn from_hermitian_unchecked(h: HermitianMatrix) -> Self {
        Self(h)
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &CMatrix {
        self.0.as_matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.min_eigenvalue()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }
}

/// Eigenvalues in ascending order with one eigenvector per value.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    /// Columns are orthonormal eigenvectors (Euclidean normalization).
    pub vectors: CMatrix,
}

impl EigenBasis {
    /// Diagonalizes the Hermitian part of `m`.
    pub fn of(m: &CMatrix) -> Self {
        let n = m.nrows();
        if n == 1 {
            return Self { values: vec![m[(0, 0)].re], vectors: CMatrix::identity(1, 1) };
        }
        let eig = SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Self { values, vectors }
    }

    /// `U diag(f(lambda)) U*`.
    pub fn recombine(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    /// `U* A U`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// `U A U*`.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.vectors * a * self.vectors.adjoint()
    }
}

/// Distinct eigenvalues and their spectral projections.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<HermitianMatrix>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.projections[0].dim();
        self.eigenvalues
            .iter()
            .zip(&self.projections)
            .fold(CMatrix::zeros(n, n), |acc, (&lam, p)| acc + p.as_matrix().scale(lam))
    }
}

/// Spectral decomposition with eigenvalues closer than
/// `CLUSTER_TOL * spectral_radius` merged into one projection.
pub fn eigh(h: &HermitianMatrix) -> SpectralDecomposition {
    let basis = EigenBasis::of(h.as_matrix());
    let n = h.dim();
    let radius = basis.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = CLUSTER_TOL * radius.max(f64::MIN_POSITIVE);

    let mut eigenvalues = Vec::new();
    let mut projections = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k + 1;
        while end < n && basis.values[end] - basis.values[end - 1] <= gap {
            end += 1;
        }
        let cols = basis.vectors.columns(k, end - k);
        let p = &cols * cols.adjoint();
        let mean = basis.values[k..end].iter().sum::<f64>() / (end - k) as f64;
        eigenvalues.push(mean);
        projections.push(HermitianMatrix::from_hermitian_part(&p));
        k = end;
    }
    SpectralDecomposition { eigenvalues, projections }
}

/// `f(H) = sum_k f(lambda_k) E_k`; fails if `f` leaves the reals at any eigenvalue.
pub fn matfunc(h: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let basis = EigenBasis::of(h.as_matrix());
    for &lam in &basis.values {
        let v = f(lam);
        if !v.is_finite() {
            return Err(QotError::Domain(format!(
                "matrix function undefined at eigenvalue {lam:.6e}"
            )));
        }
    }
    Ok(HermitianMatrix::from_hermitian_part(&basis.recombine(f)))
}

/// Matrix logarithm of a strictly positive matrix; eigenvalues at or below
/// `1e-12` are rejected rather than clipped.
pub fn logm(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let lam = h.min_eigenvalue();
    if lam <= 1e-12 {
        return Err(QotError::Domain(format!(
            "logarithm needs eigenvalues above 1e-12, got {lam:.3e}"
        )));
    }
    matfunc(h, f64::ln)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut squarings = 0u32;
    if norm1 > 0.25 {
        squarings = (norm1 / 0.25).log2().ceil() as u32;
    }
    let scaled = m.scale(1.0 / 2f64.powi(squarings as i32));
    let mut result = CMatrix::identity(n, n);
    let mut term = CMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / c(k as f64);
        result += &term;
        if frobenius(&term) < 1e-18 * frobenius(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Linear map on `M_n(C)` as an `n^2 x n^2` matrix in the GNS matrix-unit basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

pub(crate) fn vectorize(a: &CMatrix) -> DVector<C64> {
    let n = a.nrows();
    DVector::from_fn(n * n, |idx, _| a[(idx / n, idx % n)])
}

pub(crate) fn unvectorize(v: &DVector<C64>, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

pub(crate) fn matrix_unit(n: usize, k: usize, l: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(k, l)] = c(1.0);
    e
}

impl SuperOperator {
    /// Matrix of the linear map `map` (`superop_matrix`).
    pub fn from_map(n: usize, map: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let d = n * n;
        let mut matrix = CMatrix::zeros(d, d);
        for col in 0..d {
            let image = map(&matrix_unit(n, col / n, col % n));
            for row in 0..d {
                matrix[(row, col)] = image[(row / n, row % n)];
            }
        }
        Self { dim: n, matrix }
    }

    pub fn from_matrix(n: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != n * n || matrix.ncols() != n * n {
            return Err(QotError::Dimension(format!(
                "superoperator on {n}x{n} matrices needs a {0}x{0} matrix",
                n * n
            )));
        }
        Ok(Self { dim: n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { dim: n, matrix: CMatrix::identity(n * n, n * n) }
    }

    /// Left multiplication `A -> X A`.
    pub fn left_multiplication(x: &CMatrix) -> Self {
        Self::from_map(x.nrows(), |a| x * a)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        unvectorize(&(&self.matrix * vectorize(a)), self.dim)
    }

    /// Adjoint with respect to the GNS inner product.
    pub fn adjoint(&self) -> Self {
        Self { dim: self.dim, matrix: self.matrix.adjoint() }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self { dim: self.dim, matrix: &self.matrix * &other.matrix }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { dim: self.dim, matrix: self.matrix.scale(s) }
    }

    pub fn exp(&self) -> Self {
        Self { dim: self.dim, matrix: expm(&self.matrix) }
    }

    /// Largest absolute entry difference.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.matrix - &other.matrix).iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

pub fn superop_matrix(n: usize, map: impl Fn(&CMatrix) -> CMatrix) -> SuperOperator {
    SuperOperator::from_map(n, map)
}

pub fn superop_adjoint(k: &SuperOperator) -> SuperOperator {
    k.adjoint()
}

/// GNS-orthonormal basis of the traceless Hermitian matrices (`n^2 - 1`
/// generalized Gell-Mann matrices scaled so that `tau(G_a G_b) = delta_ab`).
pub fn traceless_hermitian_basis(n: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(n * n - 1);
    let off = (n as f64 / 2.0).sqrt();
    for k in 0..n {
        for l in (k + 1)..n {
            let mut sym = CMatrix::zeros(n, n);
            sym[(k, l)] = c(off);
            sym[(l, k)] = c(off);
            basis.push(sym);
            let mut anti = CMatrix::zeros(n, n);
            anti[(k, l)] = C64::new(0.0, -off);
            anti[(l, k)] = C64::new(0.0, off);
            basis.push(anti);
        }
    }
    for m in 1..n {
        let scale = (n as f64 / (m * (m + 1)) as f64).sqrt();
        let mut d = CMatrix::zeros(n, n);
        for k in 0..m {
            d[(k, k)] = c(scale);
        }
        d[(m, m)] = c(-(m as f64) * scale);
        basis.push(d);
    }
    basis
}
