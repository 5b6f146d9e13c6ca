//! Noncommutative calculus: gradient, divergence, the real structure `J`,
//! and the weighted Poisson problem that recovers a potential.

use qot::connections::ConnectionFamily;
use qot::derivation::{divergence, grad, is_real, solve_potential, weighted_laplacian};
use qot::linalg::{frobenius, gns_inner, HermitianMatrix};
use qot::lindblad::depolarizing;
use qot::sampling::{random_density, random_hermitian, rng};

fn main() -> qot::error::Result<()> {
    let js = depolarizing(2)?;
    let mut r = rng(3);
    let a = random_hermitian(2, &mut r);
    let b = random_hermitian(2, &mut r);

    // <grad A, grad B> = -<A, div grad B>
    let lhs = grad(&js, a.as_matrix()).inner(&grad(&js, b.as_matrix()));
    let rhs = -gns_inner(a.as_matrix(), &divergence(&js, &grad(&js, b.as_matrix()))?)?;
    println!("integration by parts defect {:.2e}", (lhs - rhs).norm());
    println!("grad of a Hermitian matrix is real: {}", is_real(&js, &grad(&js, a.as_matrix()))?);

    let kms = ConnectionFamily::kms(&js);
    let rho = random_density(2, 0.1, &mut r);
    let traceless = a.sub(&HermitianMatrix::identity(2).scale(a.ntrace()));
    let lap = weighted_laplacian(&js, &kms, &rho)?;
    let g = HermitianMatrix::new(lap.apply(traceless.as_matrix()))?;
    let back = solve_potential(&js, &kms, &rho, &g)?;
    println!("potential recovered to {:.2e}", frobenius(&(back.as_matrix() - traceless.as_matrix())));
    Ok(())
}
