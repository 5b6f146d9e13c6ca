//! The regularized distance computed two ways: drift in the continuity
//! equation, or a drift-free path with a Fisher-information penalty.

use qot::linalg::DensityMatrix;
use qot::lindblad::two_point;
use qot::primal::{solve_primal, solve_primal_becker_li, TransportProblem};

fn main() -> qot::error::Result<()> {
    let problem = TransportProblem::kms(
        two_point(0.3)?,
        DensityMatrix::diagonal(&[0.4, 1.6])?,
        DensityMatrix::diagonal(&[1.0, 1.0])?,
        0.1,
        16,
    )?;
    let standard = solve_primal(&problem)?.action;
    let bl = solve_primal_becker_li(&problem)?;
    println!("drift formulation   {standard:.10}");
    println!(
        "fisher formulation  {:.10} (kinetic {:.6}, fisher {:.6}, entropy difference {:.6})",
        bl.value.value, bl.value.kinetic, bl.value.fisher, bl.value.boundary
    );
    println!("relative difference {:.2e}", (standard - bl.value.value).abs() / standard);
    Ok(())
}
