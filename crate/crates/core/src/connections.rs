//! Operator connections acting on vector fields through the spectral sum
//! `[rho]_Lambda A = sum_{k,l} m(lambda_k, lambda_l) E_k A E_l`.
//!
//! Each jump index carries a scalar mean kernel `m_j(x, y)`. The KMS family
//! uses `m_omega(x, y) = int_0^1 e^{omega (s - 1/2)} x^s y^{1-s} ds` with the
//! jump set's Bohr frequencies; the arithmetic family uses `(x + y) / 2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::derivation::VectorField;
use crate::error::{QotError, Result};
use crate::linalg::{
    c, frobenius, vectorize, CMatrix, EigenBasis, HermitianMatrix, SuperOperator, C64,
};
use crate::lindblad::JumpOperatorSet;
use crate::sampling::{random_hermitian, random_positive, rng};

/// Below this `|omega + log(x/y)|` the KMS mean uses its series expansion.
pub const KMS_SINGULAR_TOL: f64 = 1e-6;
/// Relative eigenvalue cutoff defining the numerical kernel in [`quad_inverse`].
pub const QUAD_KERNEL_TOL: f64 = 1e-12;
/// Relative overlap with the numerical kernel that makes the quadratic form infinite.
pub const QUAD_OVERLAP_TOL: f64 = 1e-9;

/// KMS mean `(e^{omega/2} x - e^{-omega/2} y) / (omega + log x - log y)`.
///
/// On the locus `y = e^omega x` the quotient is 0/0; there (and within
/// [`KMS_SINGULAR_TOL`] of it) the removable-singularity expansion is used,
/// whose leading term is `e^{omega/2} x`. A zero argument gives the limit 0.
pub fn kms_mean(omega: f64, x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(QotError::Domain(format!("KMS mean needs nonnegative arguments, got ({x}, {y})")));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    let d = omega + x.ln() - y.ln();
    let base = (-omega / 2.0).exp() * y;
    if d.abs() < KMS_SINGULAR_TOL {
        Ok(base * (1.0 + d / 2.0 + d * d / 6.0 + d * d * d / 24.0))
    } else {
        Ok(base * d.exp_m1() / d)
    }
}

/// The KMS kernel for a fixed frequency as a closure.
pub fn kms_kernel(omega: f64) -> impl Fn(f64, f64) -> Result<f64> {
    move |x, y| kms_mean(omega, x, y)
}

pub type CustomMean = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Scalar mean `m(x, y)` defining one operator connection.
#[derive(Clone)]
pub enum MeanKernel {
    Kms { omega: f64 },
    Arithmetic,
    Custom(CustomMean),
}

impl fmt::Debug for MeanKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kms { omega } => write!(f, "Kms({omega})"),
            Self::Arithmetic => write!(f, "Arithmetic"),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl MeanKernel {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            Self::Kms { omega } => kms_mean(*omega, x, y),
            Self::Arithmetic => {
                if x < 0.0 || y < 0.0 {
                    return Err(QotError::Domain(format!("mean of negative arguments ({x}, {y})")));
                }
                Ok(0.5 * (x + y))
            }
            Self::Custom(f) => {
                if x < 0.0 || y < 0.0 {
                    return Err(QotError::Domain(format!("mean of negative arguments ({x}, {y})")));
                }
                let v = f(x, y);
                if !v.is_finite() {
                    return Err(QotError::Domain(format!("custom mean undefined at ({x}, {y})")));
                }
                Ok(v)
            }
        }
    }

    /// The kernel with arguments swapped, when expressible in the same family.
    pub fn swapped_matches(&self, other: &MeanKernel, samples: &[(f64, f64)]) -> Result<f64> {
        let mut worst = 0.0f64;
        for &(x, y) in samples {
            worst = worst.max((self.eval(y, x)? - other.eval(x, y)?).abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Kms,
    Arithmetic,
    Custom,
}

/// One mean kernel per jump index.
#[derive(Debug, Clone)]
pub struct ConnectionFamily {
    name: FamilyName,
    kernels: Vec<MeanKernel>,
}

impl ConnectionFamily {
    /// KMS kernels bound to the jump set's Bohr frequencies.
    pub fn kms(js: &JumpOperatorSet) -> Self {
        let kernels = js.jumps().iter().map(|j| MeanKernel::Kms { omega: j.omega }).collect();
        Self { name: FamilyName::Kms, kernels }
    }

    pub fn arithmetic(len: usize) -> Self {
        Self { name: FamilyName::Arithmetic, kernels: vec![MeanKernel::Arithmetic; len] }
    }

    pub fn custom(kernels: Vec<MeanKernel>) -> Self {
        Self { name: FamilyName::Custom, kernels }
    }

    pub fn by_name(name: FamilyName, js: &JumpOperatorSet) -> Result<Self> {
        match name {
            FamilyName::Kms => Ok(Self::kms(js)),
            FamilyName::Arithmetic => Ok(Self::arithmetic(js.len())),
            FamilyName::Custom => Err(QotError::Unsupported("custom families need explicit kernels".into())),
        }
    }

    pub fn name(&self) -> FamilyName {
        self.name
    }

    pub fn kernels(&self) -> &[MeanKernel] {
        &self.kernels
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// Worst `|m_{j*}(x, y) - m_j(y, x)|` over a log-spaced grid.
    pub fn symmetry_residual(&self, js: &JumpOperatorSet) -> Result<f64> {
        if self.len() != js.len() {
            return Err(QotError::Dimension(format!(
                "family has {} kernels for {} jumps",
                self.len(),
                js.len()
            )));
        }
        let grid: Vec<f64> = (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
        let samples: Vec<(f64, f64)> = grid.iter().flat_map(|&x| grid.iter().map(move |&y| (x, y))).collect();
        let mut worst = 0.0f64;
        for j in 0..js.len() {
            let partner = &self.kernels[js.adjoint_index(j)];
            worst = worst.max(self.kernels[j].swapped_matches(partner, &samples)?);
        }
        Ok(worst)
    }

    /// Spectral data of `[rho]_Lambda`, reusable across many fields.
    pub fn prepare(&self, rho: &HermitianMatrix) -> Result<ConnectionAction> {
        ConnectionAction::new(self, rho)
    }
}

/// `[rho]_Lambda` in the eigenbasis of `rho`: each component `j` is scaled
/// entrywise by `m_j(lambda_k, lambda_l)`.
#[derive(Debug, Clone)]
pub struct ConnectionAction {
    basis: EigenBasis,
    weights: Vec<DMatrix<f64>>,
    kernels: Vec<MeanKernel>,
}

impl ConnectionAction {
    pub fn new(family: &ConnectionFamily, rho: &HermitianMatrix) -> Result<Self> {
        let mut basis = EigenBasis::of(rho.as_matrix());
        let scale = basis.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for v in basis.values.iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 * scale {
                    return Err(QotError::Domain(format!("connection needs a positive matrix, eigenvalue {v:.3e}")));
                }
                *v = 0.0;
            }
        }
        let n = rho.dim();
        let weights = family
            .kernels
            .iter()
            .map(|kernel| {
                let mut w = DMatrix::zeros(n, n);
                for k in 0..n {
                    for l in 0..n {
                        w[(k, l)] = kernel.eval(basis.values[k], basis.values[l])?;
                    }
                }
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, weights, kernels: family.kernels.clone() })
    }

    pub fn eigenbasis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    fn check(&self, v: &VectorField) -> Result<()> {
        if v.len() != self.weights.len() {
            return Err(QotError::Dimension(format!(
                "field has {} components, connection has {}",
                v.len(),
                self.weights.len()
            )));
        }
        Ok(())
    }

    pub fn apply_component(&self, j: usize, a: &CMatrix) -> CMatrix {
        let mut t = self.basis.to_eigenbasis(a);
        let w = &self.weights[j];
        for k in 0..t.nrows() {
            for l in 0..t.ncols() {
                t[(k, l)] *= w[(k, l)];
            }
        }
        self.basis.from_eigenbasis(&t)
    }

    pub fn apply(&self, v: &VectorField) -> Result<VectorField> {
        self.check(v)?;
        Ok(VectorField::new(
            v.components().iter().enumerate().map(|(j, a)| self.apply_component(j, a)).collect(),
        ))
    }

    /// `<V, [rho]_Lambda V>` computed in the eigenbasis.
    pub fn quadratic_form(&self, v: &VectorField) -> Result<f64> {
        self.check(v)?;
        Ok(self.quadratic_form_rotated(&self.rotate(v)))
    }

    /// Components expressed in the eigenbasis of `rho`.
    pub fn rotate(&self, v: &VectorField) -> Vec<CMatrix> {
        v.components().iter().map(|a| self.basis.to_eigenbasis(a)).collect()
    }

    pub(crate) fn quadratic_form_rotated(&self, rotated: &[CMatrix]) -> f64 {
        self.bilinear_rotated(rotated, rotated)
    }

    /// `Re <V, [rho]_Lambda W>` for fields already in the eigenbasis.
    pub(crate) fn bilinear_rotated(&self, v: &[CMatrix], w: &[CMatrix]) -> f64 {
        let n = self.basis.values.len();
        let mut acc = 0.0;
        for ((a, b), m) in v.iter().zip(w).zip(&self.weights) {
            for k in 0..n {
                for l in 0..n {
                    let z = a[(k, l)].conj() * b[(k, l)];
                    acc += m[(k, l)] * z.re;
                }
            }
        }
        acc / n as f64
    }

    /// Hermitian `G` with `d/ds <V, [rho + s H] V> = tau(G H)` at `s = 0`,
    /// assembled from first divided differences of each kernel in the eigenbasis.
    pub fn quadratic_form_gradient(&self, v: &VectorField) -> Result<HermitianMatrix> {
        self.check(v)?;
        let lam = &self.basis.values;
        let n = lam.len();
        let floor = 1e-12 * lam.iter().fold(1.0f64, |m, x| m.max(*x));
        let lam: Vec<f64> = lam.iter().map(|x| x.max(floor)).collect();
        let mut g = CMatrix::zeros(n, n);
        for (kernel, comp) in self.kernels.iter().zip(v.components()) {
            let x = self.basis.to_eigenbasis(comp);
            for a in 0..n {
                for b in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..n {
                        // first slot: rows a, b share column l
                        let d1 = divided_difference(|t| kernel.eval(t, lam[l]), lam[b], lam[a])?;
                        acc += x[(a, l)] * x[(b, l)].conj() * d1;
                        // second slot: columns a, b share row l
                        let d2 = divided_difference(|t| kernel.eval(lam[l], t), lam[a], lam[b])?;
                        acc += x[(l, a)].conj() * x[(l, b)] * d2;
                    }
                    g[(a, b)] += acc;
                }
            }
        }
        let g = self.basis.from_eigenbasis(&g);
        Ok(HermitianMatrix::from_hermitian_part(&g))
    }

    /// Matrix of `[rho]_{Lambda_j}` as a superoperator.
    pub fn component_superoperator(&self, j: usize) -> SuperOperator {
        SuperOperator::from_map(self.basis.values.len(), |a| self.apply_component(j, a))
    }
}

/// `(f(a) - f(b)) / (a - b)`, or a central-difference derivative when `a` and `b` nearly coincide.
fn divided_difference(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let scale = a.abs().max(b.abs());
    if (a - b).abs() > 1e-6 * scale {
        return Ok((f(a)? - f(b)?) / (a - b));
    }
    let mid = 0.5 * (a + b);
    let h = 1e-5 * mid;
    Ok((f(mid + h)? - f(mid - h)?) / (2.0 * h))
}

pub fn apply_connection(conn: &ConnectionFamily, rho: &HermitianMatrix, v: &VectorField) -> Result<VectorField> {
    conn.prepare(rho)?.apply(v)
}

pub fn weighted_norm_sq(conn: &ConnectionFamily, rho: &HermitianMatrix, v: &VectorField) -> Result<f64> {
    conn.prepare(rho)?.quadratic_form(v)
}

/// Eigen-decomposition of each block `[rho]_{Lambda_j}`.
struct BlockSpectrum {
    values: Vec<Vec<f64>>,
    /// Per block, GNS coefficients `<W_k, V_j>` of the field along each eigenvector.
    overlaps: Vec<Vec<C64>>,
}

fn block_spectrum(conn: &ConnectionFamily, rho: &HermitianMatrix, v: &VectorField) -> Result<BlockSpectrum> {
    let action = conn.prepare(rho)?;
    action.check(v)?;
    let n = rho.dim();
    let mut values = Vec::with_capacity(v.len());
    let mut overlaps = Vec::with_capacity(v.len());
    for (j, comp) in v.components().iter().enumerate() {
        let block = action.component_superoperator(j);
        let eig = EigenBasis::of(block.matrix());
        let coeffs = vectorize(comp) / c((n as f64).sqrt());
        let ov = (0..eig.values.len())
            .map(|k| {
                let w = eig.vectors.column(k);
                w.iter().zip(coeffs.iter()).map(|(a, b)| a.conj() * b).sum::<C64>()
            })
            .collect();
        values.push(eig.values);
        overlaps.push(ov);
    }
    Ok(BlockSpectrum { values, overlaps })
}

/// `<V, [rho]_Lambda^{-1} V>` with the convention that the value is `+inf`
/// when `V` has a component in the kernel.
pub fn quad_inverse(conn: &ConnectionFamily, rho: &HermitianMatrix, v: &VectorField) -> Result<f64> {
    let spec = block_spectrum(conn, rho, v)?;
    let largest = spec.values.iter().flatten().fold(0.0f64, |m, &x| m.max(x));
    let cutoff = QUAD_KERNEL_TOL * largest;
    let norm = v.norm();
    let mut kernel_weight = 0.0;
    let mut value = 0.0;
    for (vals, ovs) in spec.values.iter().zip(&spec.overlaps) {
        for (&lam, ov) in vals.iter().zip(ovs) {
            if lam <= cutoff {
                kernel_weight += ov.norm_sqr();
            } else {
                value += ov.norm_sqr() / lam;
            }
        }
    }
    if kernel_weight.sqrt() > QUAD_OVERLAP_TOL * norm {
        return Ok(f64::INFINITY);
    }
    Ok(value)
}

/// `<V, ([rho]_Lambda + id/k)^{-1} V>` along `k = 10^{6 i / (steps - 1)}`.
pub fn monotone_inverse_convergence(
    conn: &ConnectionFamily,
    rho: &HermitianMatrix,
    v: &VectorField,
    steps: usize,
) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(QotError::Domain("need at least two steps".into()));
    }
    let spec = block_spectrum(conn, rho, v)?;
    Ok((0..steps)
        .map(|i| {
            let k = 10f64.powf(6.0 * i as f64 / (steps - 1) as f64);
            spec.values
                .iter()
                .zip(&spec.overlaps)
                .flat_map(|(vals, ovs)| vals.iter().zip(ovs))
                .map(|(&lam, ov)| ov.norm_sqr() / (lam.max(0.0) + 1.0 / k))
                .sum()
        })
        .collect())
}

/// Directional derivative `<V, (d f_Lambda(B)[A]) V>` of `B -> [B]_Lambda` by
/// central differences with one Richardson step.
pub fn frechet_quadform(
    conn: &ConnectionFamily,
    b: &HermitianMatrix,
    a: &HermitianMatrix,
    v: &VectorField,
) -> Result<f64> {
    if b.min_eigenvalue() <= 0.0 || a.min_eigenvalue() <= 0.0 {
        return Err(QotError::Domain("Fréchet quadratic form needs strictly positive matrices".into()));
    }
    let h = 1e-5 * frobenius(b.as_matrix()) / frobenius(a.as_matrix());
    let f = |s: f64| weighted_norm_sq(conn, &b.add(&a.scale(s)), v);
    let central = |step: f64| -> Result<f64> { Ok((f(step)? - f(-step)?) / (2.0 * step)) };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Kubo–Ando form `A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}` with `f(t) = m(1, t)`.
pub fn connection_matrix(kernel: &MeanKernel, a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    let ea = EigenBasis::of(a.as_matrix());
    if ea.values[0] <= 0.0 {
        return Err(QotError::Domain("first argument of a connection must be invertible here".into()));
    }
    let sqrt_a = ea.recombine(f64::sqrt);
    let inv_sqrt_a = ea.recombine(|x| 1.0 / x.sqrt());
    let inner = &inv_sqrt_a * b.as_matrix() * &inv_sqrt_a;
    let ei = EigenBasis::of(&inner);
    let mut fvals = Vec::with_capacity(ei.values.len());
    for &t in &ei.values {
        fvals.push(kernel.eval(1.0, t.max(0.0))?);
    }
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(fvals.len(), fvals.iter().map(|&v| c(v))));
    let f_inner = &ei.vectors * diag * ei.vectors.adjoint();
    Ok(HermitianMatrix::from_hermitian_part(&(&sqrt_a * f_inner * &sqrt_a)))
}

fn loewner_margin(upper: &HermitianMatrix, lower: &HermitianMatrix) -> f64 {
    upper.sub(lower).min_eigenvalue()
}

/// Worst margins found by [`connection_axioms`]; nonnegative up to round-off when
/// the axioms hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxiomReport {
    pub monotonicity: f64,
    pub transformer: f64,
    pub continuity: f64,
    /// Distance between `Lambda(A + 2^-20, B + 2^-20)` and `Lambda(A, B)`.
    pub limit_error: f64,
}

impl AxiomReport {
    pub fn worst_margin(&self) -> f64 {
        self.monotonicity.min(self.transformer).min(self.continuity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst_margin() >= -tol && self.limit_error <= 1e-4
    }
}

/// Randomized audit of monotonicity, the transformer inequality, and
/// continuity from above on `dim x dim` positive matrices.
pub fn connection_axioms(kernel: &MeanKernel, dim: usize, trials: usize, seed: u64) -> Result<AxiomReport> {
    let mut r = rng(seed);
    let mut report = AxiomReport {
        monotonicity: f64::INFINITY,
        transformer: f64::INFINITY,
        continuity: f64::INFINITY,
        limit_error: 0.0,
    };
    for _ in 0..trials {
        let a = random_positive(dim, 0.2, 2.0, &mut r);
        let b = random_positive(dim, 0.2, 2.0, &mut r);
        let base = connection_matrix(kernel, &a, &b)?;

        let p = random_positive(dim, 0.0, 1.0, &mut r);
        let q = random_positive(dim, 0.0, 1.0, &mut r);
        let bigger = connection_matrix(kernel, &a.add(&p), &b.add(&q))?;
        report.monotonicity = report.monotonicity.min(loewner_margin(&bigger, &base));

        let mut cm = random_hermitian(dim, &mut r);
        while cm.eigenvalues().iter().any(|x| x.abs() < 0.2) {
            cm = random_hermitian(dim, &mut r);
        }
        let cmat = cm.as_matrix();
        let cac = HermitianMatrix::from_hermitian_part(&(cmat * a.as_matrix() * cmat));
        let cbc = HermitianMatrix::from_hermitian_part(&(cmat * b.as_matrix() * cmat));
        let transformed = connection_matrix(kernel, &cac, &cbc)?;
        let sandwiched = HermitianMatrix::from_hermitian_part(&(cmat * base.as_matrix() * cmat));
        report.transformer = report.transformer.min(loewner_margin(&transformed, &sandwiched));

        let id = HermitianMatrix::identity(dim);
        let mut prev: Option<HermitianMatrix> = None;
        for k in 0..=20 {
            let eps = 2f64.powi(-k);
            let cur = connection_matrix(kernel, &a.add(&id.scale(eps)), &b.add(&id.scale(eps)))?;
            report.continuity = report.continuity.min(loewner_margin(&cur, &base));
            if let Some(p) = &prev {
                report.continuity = report.continuity.min(loewner_margin(p, &cur));
            }
            if k == 20 {
                report.limit_error = report.limit_error.max(frobenius(&(cur.as_matrix() - base.as_matrix())));
            }
            prev = Some(cur);
        }
    }
    Ok(report)
}
