//! Operator connections: scalar KMS means, the spectral action `[rho]_omega`,
//! its integral form, and the Kubo–Ando axiom audit.

use qot::connections::{connection_axioms, kms_mean, weighted_norm_sq, ConnectionFamily, MeanKernel};
use qot::derivation::VectorField;
use qot::linalg::frobenius;
use qot::lindblad::two_point;
use qot::quadrature::{kms_action_quadrature, kms_mean_quadrature};
use qot::sampling::{random_density, random_matrix, rng};

fn main() -> qot::error::Result<()> {
    for omega in [0.0, 0.8473] {
        let closed = kms_mean(omega, 0.4, 1.6)?;
        let quad = kms_mean_quadrature(omega, 0.4, 1.6, 200);
        println!("kms mean omega={omega}: closed form {closed:.12}, quadrature {quad:.12}");
    }

    let js = two_point(0.3)?;
    let kms = ConnectionFamily::kms(&js);
    let mut r = rng(7);
    let rho = random_density(2, 0.05, &mut r);
    let field = VectorField::new(vec![random_matrix(2, &mut r), random_matrix(2, &mut r)]);
    let spectral = kms.prepare(rho.hermitian())?.apply(&field)?;
    for (j, jump) in js.jumps().iter().enumerate() {
        let integral = kms_action_quadrature(jump.omega, rho.hermitian(), &field.components()[j], 200)?;
        println!("component {j}: spectral vs integral {:.2e}", frobenius(&(&spectral.components()[j] - integral)));
    }
    println!("weighted norm |V|_rho^2 = {:.8}", weighted_norm_sq(&kms, rho.hermitian(), &field)?);

    for kernel in [MeanKernel::Kms { omega: 0.0 }, MeanKernel::Kms { omega: 1.0 }, MeanKernel::Arithmetic] {
        let audit = connection_axioms(&kernel, 3, 100, 1)?;
        println!("{kernel:?}: worst axiom margin {:.2e}", audit.worst_margin());
    }
    Ok(())
}
