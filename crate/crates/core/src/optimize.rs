//! Small numerical kernels shared by the solvers: simplex projection, density
//! projection, and block-tridiagonal solves.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{QotError, Result};
use crate::linalg::{c, CMatrix, EigenBasis, HermitianMatrix};

/// Euclidean projection of `v` onto `{x >= floor, sum x = total}`.
pub fn project_capped_simplex(v: &[f64], floor: f64, total: f64) -> Result<Vec<f64>> {
    let m = v.len();
    let free = total - floor * m as f64;
    if m == 0 || free < 0.0 {
        return Err(QotError::Domain(format!("no point of {m} entries above {floor} sums to {total}")));
    }
    let y: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = y.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - free) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    Ok(y.iter().map(|x| (x - theta).max(0.0) + floor).collect())
}

/// Nearest Hermitian matrix (Frobenius) with eigenvalues `>= floor` and normalized trace 1.
pub fn project_density(h: &CMatrix, floor: f64) -> Result<HermitianMatrix> {
    let n = h.nrows();
    let eig = EigenBasis::of(h);
    let projected = project_capped_simplex(&eig.values, floor, n as f64)?;
    let d = CMatrix::from_diagonal(&DVector::from_iterator(n, projected.iter().map(|&x| c(x))));
    Ok(HermitianMatrix::from_hermitian_part(&(&eig.vectors * d * eig.vectors.adjoint())))
}

/// Symmetric positive definite block-tridiagonal system
/// `lower[i-1] x[i-1] + diag[i] x[i] + lower[i]^T x[i+1] = rhs[i]`.
pub fn solve_block_tridiagonal(
    diag: &[DMatrix<f64>],
    lower: &[DMatrix<f64>],
    rhs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let k = diag.len();
    if rhs.len() != k || lower.len() + 1 != k.max(1) {
        return Err(QotError::Dimension("block-tridiagonal system has inconsistent sizes".into()));
    }
    // block Cholesky sweep: S_i = D_i - L_{i-1} S_{i-1}^{-1} L_{i-1}^T
    let mut factors: Vec<Cholesky<f64, nalgebra::Dyn>> = Vec::with_capacity(k);
    let mut forward: Vec<DVector<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut s = diag[i].clone();
        let mut r = rhs[i].clone();
        if i > 0 {
            let l = &lower[i - 1];
            let prev = &factors[i - 1];
            s -= l * prev.solve(&l.transpose());
            r -= l * prev.solve(&forward[i - 1]);
        }
        let chol = Cholesky::new(s).ok_or_else(|| QotError::Domain("block system is not positive definite".into()))?;
        factors.push(chol);
        forward.push(r);
    }
    let mut x = vec![DVector::zeros(0); k];
    for i in (0..k).rev() {
        let mut r = forward[i].clone();
        if i + 1 < k {
            r -= lower[i].transpose() * &x[i + 1];
        }
        x[i] = factors[i].solve(&r);
    }
    Ok(x)
}
