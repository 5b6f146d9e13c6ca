//! Commutator calculus over a jump set: `partial_j A = [V_j, A]`, the gradient,
//! its negative adjoint `div`, the real structure `J`, and the weighted
//! Laplacian `K_rho = -div [rho]_Lambda grad`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::connections::{ConnectionAction, ConnectionFamily};
use crate::error::{QotError, Result};
use crate::linalg::{
    frobenius, gns_inner_unchecked, ntrace, trace_product, traceless_hermitian_basis, CMatrix, DensityMatrix,
    HermitianMatrix, SuperOperator, C64,
};
use crate::lindblad::JumpOperatorSet;

/// Tolerance for membership in the real subspace.
pub const REAL_TOL: f64 = 1e-10;

/// Element of the direct sum of `|J|` copies of the GNS space.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<CMatrix>,
}

impl VectorField {
    pub fn new(components: Vec<CMatrix>) -> Self {
        Self { components }
    }

    pub fn zeros(n: usize, len: usize) -> Self {
        Self { components: vec![CMatrix::zeros(n, n); len] }
    }

    pub fn components(&self) -> &[CMatrix] {
        &self.components
    }

    pub fn into_components(self) -> Vec<CMatrix> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `<self, other>` summed over components.
    pub fn inner(&self, other: &VectorField) -> C64 {
        self.components.iter().zip(&other.components).map(|(a, b)| gns_inner_unchecked(a, b)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { components: self.components.iter().map(|a| a.scale(s)).collect() }
    }

    pub fn add(&self, other: &VectorField) -> Self {
        Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect() }
    }
}

fn check_components(js: &JumpOperatorSet, v: &VectorField) -> Result<()> {
    if v.len() != js.len() {
        return Err(QotError::Dimension(format!("field has {} components for {} jumps", v.len(), js.len())));
    }
    Ok(())
}

pub fn partial(js: &JumpOperatorSet, j: usize, a: &CMatrix) -> Result<CMatrix> {
    let jump = js
        .jumps()
        .get(j)
        .ok_or_else(|| QotError::Dimension(format!("jump index {j} out of range ({} jumps)", js.len())))?;
    Ok(&jump.op * a - a * &jump.op)
}

pub fn grad(js: &JumpOperatorSet, a: &CMatrix) -> VectorField {
    VectorField::new(js.jumps().iter().map(|jump| &jump.op * a - a * &jump.op).collect())
}

/// `-sum_j [V_j^*, W_j]`, the adjoint of `-grad`.
pub fn divergence(js: &JumpOperatorSet, v: &VectorField) -> Result<CMatrix> {
    check_components(js, v)?;
    let n = js.dim();
    let mut out = CMatrix::zeros(n, n);
    for (jump, w) in js.jumps().iter().zip(v.components()) {
        let vs = jump.op.adjoint();
        out -= &vs * w - w * &vs;
    }
    Ok(out)
}

/// Anti-linear involution sending `W` in slot `j` to `-W^*` in slot `j*`.
///
/// On spanning elements this is `J(X partial_j A) = partial_{j*}(A^*) X^*`,
/// since `(X [V_j, A])^* = -[V_j^*, A^*] X^*` and `V_{j*} = V_j^*`.
pub fn j_map(js: &JumpOperatorSet, v: &VectorField) -> Result<VectorField> {
    check_components(js, v)?;
    let mut out = vec![CMatrix::zeros(js.dim(), js.dim()); js.len()];
    for (j, w) in v.components().iter().enumerate() {
        out[js.adjoint_index(j)] = -w.adjoint();
    }
    Ok(VectorField::new(out))
}

/// Largest Frobenius distance between `J(V)` and `V` over components.
pub fn real_residual(js: &JumpOperatorSet, v: &VectorField) -> Result<f64> {
    let jv = j_map(js, v)?;
    Ok(jv.components().iter().zip(v.components()).map(|(a, b)| frobenius(&(a - b))).fold(0.0, f64::max))
}

pub fn is_real(js: &JumpOperatorSet, v: &VectorField) -> Result<bool> {
    Ok(real_residual(js, v)? <= REAL_TOL)
}

fn require_positive(rho: &HermitianMatrix) -> Result<()> {
    let min = rho.min_eigenvalue();
    if min <= 0.0 {
        return Err(QotError::Domain(format!("weighted Laplacian needs a positive density, min eigenvalue {min:.3e}")));
    }
    Ok(())
}

pub fn weighted_laplacian(js: &JumpOperatorSet, conn: &ConnectionFamily, rho: &DensityMatrix) -> Result<SuperOperator> {
    require_positive(rho.hermitian())?;
    let action = conn.prepare(rho.hermitian())?;
    if action.weights().len() != js.len() {
        return Err(QotError::Dimension(format!(
            "connection has {} kernels for {} jumps",
            action.weights().len(),
            js.len()
        )));
    }
    Ok(SuperOperator::from_map(js.dim(), |a| {
        let v = action.apply(&grad(js, a)).expect("component counts checked");
        -divergence(js, &v).expect("component counts checked")
    }))
}

/// Solve `K_rho(A) = g` for the traceless Hermitian `A`.
pub fn solve_potential(
    js: &JumpOperatorSet,
    conn: &ConnectionFamily,
    rho: &DensityMatrix,
    g: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let calc = Calculus::new(js)?;
    require_positive(rho.hermitian())?;
    let action = conn.prepare(rho.hermitian())?;
    calc.solve(&action, g)
}

/// Traceless Hermitian basis with precomputed gradients, used to assemble
/// `K_rho` as a real symmetric `(n^2 - 1)`-square matrix.
#[derive(Debug, Clone)]
pub struct Calculus {
    dim: usize,
    basis: Vec<CMatrix>,
    grads: Vec<VectorField>,
}

/// Eigenvalues of the Dirichlet Gram matrix below this fraction of the largest count as kernel.
const GRAM_KERNEL_TOL: f64 = 1e-10;

impl Calculus {
    /// Fails with a structural error when `grad` has more than constants in its kernel.
    pub fn new(js: &JumpOperatorSet) -> Result<Self> {
        let n = js.dim();
        let basis = traceless_hermitian_basis(n);
        let grads: Vec<VectorField> = basis.iter().map(|b| grad(js, b)).collect();
        let m = basis.len();
        let gram = DMatrix::from_fn(m, m, |a, b| grads[a].inner(&grads[b]).re);
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let top = eig.iter().fold(0.0f64, |acc, &x| acc.max(x));
        let kernel = eig.iter().filter(|&&x| x <= GRAM_KERNEL_TOL * top.max(1e-300)).count();
        if kernel > 0 || m == 0 && n > 1 {
            return Err(QotError::NonErgodic(kernel + 1));
        }
        Ok(Self { dim: n, basis, grads })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    pub fn basis_grads(&self) -> &[VectorField] {
        &self.grads
    }

    /// Coordinates `tau(G_a h)` of a Hermitian matrix along the basis.
    pub fn coords(&self, h: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|b| trace_product(b, h).re))
    }

    pub fn from_coords(&self, x: &DVector<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (b, &c) in self.basis.iter().zip(x.iter()) {
            out += b.scale(c);
        }
        out
    }

    /// `K_ab = <grad G_a, [rho] grad G_b>`.
    pub fn laplacian_matrix(&self, action: &ConnectionAction) -> DMatrix<f64> {
        let rotated: Vec<Vec<CMatrix>> = self.grads.iter().map(|g| action.rotate(g)).collect();
        let m = self.basis.len();
        let mut k = DMatrix::zeros(m, m);
        for a in 0..m {
            for b in a..m {
                let v = action.bilinear_rotated(&rotated[a], &rotated[b]);
                k[(a, b)] = v;
                k[(b, a)] = v;
            }
        }
        k
    }

    pub fn solve(&self, action: &ConnectionAction, g: &HermitianMatrix) -> Result<HermitianMatrix> {
        let tr = ntrace(g.as_matrix())?.re;
        if tr.abs() > REAL_TOL * frobenius(g.as_matrix()).max(1.0) {
            return Err(QotError::InconsistentRhs(tr));
        }
        let k = self.laplacian_matrix(action);
        let x = self.solve_coords(k, &self.coords(g.as_matrix()))?;
        Ok(HermitianMatrix::from_hermitian_part(&self.from_coords(&x)))
    }

    pub(crate) fn solve_coords(&self, k: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let chol = Cholesky::new(k).ok_or(QotError::NonErgodic(2))?;
        Ok(chol.solve(rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::apply_connection;
    use crate::linalg::matrix_unit;
    use crate::lindblad::{build_generator, dephasing_free_chain, depolarizing, two_point, Jump};
    use crate::sampling::{random_density, random_hermitian, random_matrix, rng};

    fn presets() -> Vec<JumpOperatorSet> {
        vec![
            depolarizing(2).unwrap(),
            depolarizing(3).unwrap(),
            two_point(0.3).unwrap(),
            dephasing_free_chain(&[0.2, 0.5, 0.3]).unwrap(),
        ]
    }

    #[test]
    fn partial_examples() {
        let js = two_point(0.3).unwrap();
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).into_matrix();
        let d = partial(&js, 0, &a).unwrap();
        let expected = matrix_unit(2, 0, 1).scale(-(2f64.sqrt()));
        assert!(frobenius(&(d - expected)) < 1e-15);
        assert!(frobenius(&partial(&js, 1, &CMatrix::identity(2, 2)).unwrap()) == 0.0);
        assert!(partial(&js, 2, &a).is_err());
        let v = js.jumps()[0].op.clone();
        assert!(frobenius(&partial(&js, 0, &v).unwrap()) == 0.0);
    }

    #[test]
    fn gradient_kernel_is_constants() {
        for js in presets() {
            let n = js.dim();
            assert!(grad(&js, &CMatrix::identity(n, n)).norm() == 0.0);
            let stacked = DMatrix::from_fn(n * n * js.len(), n * n, |row, col| {
                let e = matrix_unit(n, col / n, col % n);
                let j = row / (n * n);
                let r = row % (n * n);
                partial(&js, j, &e).unwrap()[(r / n, r % n)]
            });
            let sv = stacked.svd(false, false).singular_values;
            let top = sv.max();
            assert_eq!(sv.iter().filter(|&&s| s < 1e-10 * top).count(), 1);
        }
    }

    #[test]
    fn integration_by_parts() {
        let mut r = rng(31);
        for js in presets() {
            let n = js.dim();
            for _ in 0..10 {
                let a = random_matrix(n, &mut r);
                let v = VectorField::new((0..js.len()).map(|_| random_matrix(n, &mut r)).collect());
                let lhs = grad(&js, &a).inner(&v);
                let rhs = -ntrace(&(a.adjoint() * divergence(&js, &v).unwrap())).unwrap();
                assert!((lhs - rhs).norm() < 1e-10);
                assert!(ntrace(&divergence(&js, &v).unwrap()).unwrap().norm() < 1e-12);
                assert!(ntrace(&divergence(&js, &grad(&js, &a)).unwrap()).unwrap().norm() < 1e-12);
            }
            assert!(divergence(&js, &VectorField::zeros(n, js.len() + 1)).is_err());
        }
    }

    #[test]
    fn j_map_properties() {
        let mut r = rng(32);
        for js in presets() {
            let n = js.dim();
            let len = js.len();
            for _ in 0..10 {
                let a = random_hermitian(n, &mut r);
                let g = grad(&js, a.as_matrix());
                assert!(real_residual(&js, &g).unwrap() < 1e-12);
                let v = VectorField::new((0..len).map(|_| random_matrix(n, &mut r)).collect());
                let w = VectorField::new((0..len).map(|_| random_matrix(n, &mut r)).collect());
                let jv = j_map(&js, &v).unwrap();
                let jw = j_map(&js, &w).unwrap();
                assert!((jv.inner(&jw) - w.inner(&v)).norm() < 1e-10);
                assert!(j_map(&js, &jv).unwrap().sub(&v).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn j_map_agrees_with_defining_formula_on_spanning_elements() {
        let mut r = rng(33);
        for js in presets() {
            let n = js.dim();
            for j in 0..js.len() {
                let x = random_matrix(n, &mut r);
                let a = random_matrix(n, &mut r);
                let mut v = VectorField::zeros(n, js.len());
                let mut comps = v.into_components();
                comps[j] = &x * partial(&js, j, &a).unwrap();
                v = VectorField::new(comps);
                let jv = j_map(&js, &v).unwrap();
                let js_idx = js.adjoint_index(j);
                let expected = partial(&js, js_idx, &a.adjoint()).unwrap() * x.adjoint();
                assert!(frobenius(&(&jv.components()[js_idx] - expected)) < 1e-12);

                // product rule variant J((partial_j A) X) = X^* partial_{j*}(A^*)
                let mut comps = vec![CMatrix::zeros(n, n); js.len()];
                comps[j] = partial(&js, j, &a).unwrap() * &x;
                let jv = j_map(&js, &VectorField::new(comps)).unwrap();
                let expected = x.adjoint() * partial(&js, js_idx, &a.adjoint()).unwrap();
                assert!(frobenius(&(&jv.components()[js_idx] - expected)) < 1e-10);
            }
        }
    }

    #[test]
    fn weighted_gradient_stays_real() {
        let mut r = rng(34);
        for js in presets() {
            let conn = ConnectionFamily::kms(&js);
            for _ in 0..5 {
                let rho = random_density(js.dim(), 0.05, &mut r);
                let a = random_hermitian(js.dim(), &mut r);
                let v = apply_connection(&conn, rho.hermitian(), &grad(&js, a.as_matrix())).unwrap();
                assert!(is_real(&js, &v).unwrap());
            }
        }
    }

    #[test]
    fn laplacian_at_identity_is_minus_generator_without_frequencies() {
        for js in [depolarizing(2).unwrap(), depolarizing(3).unwrap(), two_point(0.5).unwrap()] {
            let conn = ConnectionFamily::kms(&js);
            let k = weighted_laplacian(&js, &conn, &DensityMatrix::maximally_mixed(js.dim())).unwrap();
            let g = build_generator(&js).unwrap();
            assert!(k.distance(&g.forward.scale(-1.0)) < 1e-12);
        }
    }

    #[test]
    fn laplacian_is_positive_and_kills_constants() {
        let mut r = rng(35);
        for js in presets() {
            let n = js.dim();
            let conn = ConnectionFamily::kms(&js);
            let rho = random_density(n, 0.05, &mut r);
            let k = weighted_laplacian(&js, &conn, &rho).unwrap();
            assert!(frobenius(&k.apply(&CMatrix::identity(n, n))) < 1e-12);
            for _ in 0..10 {
                let a = random_hermitian(n, &mut r);
                let q = gns_inner_unchecked(a.as_matrix(), &k.apply(a.as_matrix()));
                assert!(q.re >= -1e-12 && q.im.abs() < 1e-12);
                let direct = conn.prepare(rho.hermitian()).unwrap().quadratic_form(&grad(&js, a.as_matrix())).unwrap();
                assert!((q.re - direct).abs() < 1e-12);
            }
        }
        let singular = DensityMatrix::diagonal(&[2.0, 0.0]).unwrap();
        let js = two_point(0.3).unwrap();
        assert!(weighted_laplacian(&js, &ConnectionFamily::kms(&js), &singular).is_err());
    }

    #[test]
    fn potential_solve_round_trip() {
        let mut r = rng(36);
        for js in presets() {
            let n = js.dim();
            let conn = ConnectionFamily::kms(&js);
            let rho = random_density(n, 0.05, &mut r);
            let k = weighted_laplacian(&js, &conn, &rho).unwrap();
            let zero = solve_potential(&js, &conn, &rho, &HermitianMatrix::zeros(n)).unwrap();
            assert!(frobenius(zero.as_matrix()) == 0.0);
            for _ in 0..5 {
                let b = random_hermitian(n, &mut r);
                let tr = b.ntrace();
                let b = b.sub(&HermitianMatrix::identity(n).scale(tr));
                let g = HermitianMatrix::from_hermitian_part(&k.apply(b.as_matrix()));
                let a = solve_potential(&js, &conn, &rho, &g).unwrap();
                assert!(frobenius(&(a.as_matrix() - b.as_matrix())) < 1e-8);
                assert!(a.ntrace().abs() < 1e-12);
                let resid = frobenius(&(k.apply(a.as_matrix()) - g.as_matrix()));
                assert!(resid <= 1e-9 * frobenius(g.as_matrix()));
            }
            let bad = HermitianMatrix::identity(n);
            assert!(matches!(solve_potential(&js, &conn, &rho, &bad), Err(QotError::InconsistentRhs(_))));
        }
    }

    #[test]
    fn potential_solve_at_invariant_density() {
        let js = two_point(0.3).unwrap();
        let conn = ConnectionFamily::kms(&js);
        let g = HermitianMatrix::from_real_diagonal(&[0.7, -0.7]);
        let a = solve_potential(&js, &conn, js.sigma(), &g).unwrap();
        let k = weighted_laplacian(&js, &conn, js.sigma()).unwrap();
        assert!(frobenius(&(k.apply(a.as_matrix()) - g.as_matrix())) < 1e-9 * frobenius(g.as_matrix()));
    }

    #[test]
    fn reducible_jump_set_is_rejected() {
        // a single dephasing pair on the first two levels of a qutrit leaves E_33 invariant
        let s = (3.0f64 / 2.0).sqrt();
        let mut x = CMatrix::zeros(3, 3);
        x[(0, 1)] = C64::new(s, 0.0);
        let js = JumpOperatorSet::new(
            DensityMatrix::maximally_mixed(3),
            vec![Jump::new(x.clone(), 0.0), Jump::new(x.adjoint(), 0.0)],
            vec![1, 0],
        )
        .unwrap();
        assert!(matches!(Calculus::new(&js), Err(QotError::NonErgodic(k)) if k >= 2));
        let conn = ConnectionFamily::kms(&js);
        let g = HermitianMatrix::from_real_diagonal(&[1.0, -1.0, 0.0]);
        assert!(matches!(
            solve_potential(&js, &conn, &DensityMatrix::maximally_mixed(3), &g),
            Err(QotError::NonErgodic(_))
        ));
    }
}
