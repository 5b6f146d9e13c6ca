//! Squared transport distance between two qubit states by minimizing the
//! discrete action, on successively finer grids.

use qot::linalg::DensityMatrix;
use qot::lindblad::two_point;
use qot::primal::{solve_primal, TransportProblem};

fn main() -> qot::error::Result<()> {
    let rho0 = DensityMatrix::diagonal(&[0.4, 1.6])?;
    let rho1 = DensityMatrix::diagonal(&[1.0, 1.0])?;
    for epsilon in [0.0, 0.1] {
        for grid in [8, 16, 32] {
            let problem = TransportProblem::kms(two_point(0.3)?, rho0.clone(), rho1.clone(), epsilon, grid)?;
            let s = solve_primal(&problem)?;
            println!(
                "eps={epsilon:<4} N={grid:<3} W^2={:.10} W={:.8} residual={:.1e} iterations={}",
                s.action,
                s.distance(),
                s.continuity_residual,
                s.iterations
            );
        }
    }
    Ok(())
}
