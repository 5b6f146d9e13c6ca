//! Lower bound from discrete subsolutions, warm-started from the primal
//! optimum, and the resulting duality gap.

use qot::dual::{check_weak_duality, relative_gap, solve_dual};
use qot::linalg::DensityMatrix;
use qot::lindblad::two_point;
use qot::primal::{solve_primal, TransportProblem};

fn main() -> qot::error::Result<()> {
    let rho0 = DensityMatrix::diagonal(&[0.4, 1.6])?;
    let rho1 = DensityMatrix::diagonal(&[1.0, 1.0])?;
    for epsilon in [0.0, 0.1] {
        let problem = TransportProblem::kms(two_point(0.3)?, rho0.clone(), rho1.clone(), epsilon, 16)?;
        let primal = solve_primal(&problem)?;
        let dual = solve_dual(&problem, Some(&primal))?;
        println!(
            "eps={epsilon}: action/2={:.10} dual={:.10} margin={:.2e} relative gap={:.2e} feasible={}",
            primal.action / 2.0,
            dual.objective,
            check_weak_duality(&primal, &dual)?,
            relative_gap(primal.action, dual.objective),
            dual.feasible()
        );
    }
    Ok(())
}
