//! Relative entropy and Fisher information with respect to the invariant density.

use serde::Serialize;

use crate::connections::ConnectionFamily;
use crate::derivation::grad;
use crate::error::{QotError, Result};
use crate::linalg::{logm, trace_product, CMatrix, DensityMatrix, HermitianMatrix};
use crate::lindblad::JumpOperatorSet;
use crate::quadrature::kms_action_quadrature;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub fisher_values: Vec<f64>,
}

/// `D(rho || sigma) = tau(rho (log rho - log sigma))`.
pub fn rel_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QotError::Dimension(format!("densities of size {} and {}", rho.dim(), sigma.dim())));
    }
    let diff = logm(rho.hermitian())?.sub(&logm(sigma.hermitian())?);
    Ok(trace_product(rho.as_matrix(), diff.as_matrix()).re)
}

/// `log rho - log sigma`.
pub fn log_ratio(js: &JumpOperatorSet, rho: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(logm(rho)?.sub(&logm(js.sigma().hermitian())?))
}

/// Fisher information with the KMS weights of the jump set.
pub fn fisher_info(js: &JumpOperatorSet, rho: &DensityMatrix) -> Result<f64> {
    fisher_info_hermitian(js, &ConnectionFamily::kms(js), rho.hermitian())
}

pub(crate) fn fisher_info_hermitian(js: &JumpOperatorSet, kms: &ConnectionFamily, rho: &HermitianMatrix) -> Result<f64> {
    let g = grad(js, log_ratio(js, rho)?.as_matrix());
    kms.prepare(rho)?.quadratic_form(&g)
}

/// Same value with `[rho]_omega` evaluated by Gauss–Legendre quadrature of its integral form.
pub fn fisher_info_quadrature(js: &JumpOperatorSet, rho: &DensityMatrix, points: usize) -> Result<f64> {
    let g = grad(js, log_ratio(js, rho.hermitian())?.as_matrix());
    let mut total = 0.0;
    for (jump, comp) in js.jumps().iter().zip(g.components()) {
        let weighted: CMatrix = kms_action_quadrature(jump.omega, rho.hermitian(), comp, points)?;
        total += trace_product(&comp.adjoint(), &weighted).re;
    }
    Ok(total)
}

/// Entropies at the endpoints and Fisher information at each listed density.
pub fn functional_report(js: &JumpOperatorSet, path: &[DensityMatrix]) -> Result<FunctionalReport> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(QotError::Domain("empty path".into())),
    };
    let kms = ConnectionFamily::kms(js);
    Ok(FunctionalReport {
        entropy_start: rel_entropy(first, js.sigma())?,
        entropy_end: rel_entropy(last, js.sigma())?,
        fisher_values: path.iter().map(|r| fisher_info_hermitian(js, &kms, r.hermitian())).collect::<Result<_>>()?,
    })
}
