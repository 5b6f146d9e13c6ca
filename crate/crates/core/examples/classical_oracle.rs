//! Diagonal data reduce to a classical Markov chain; compare the matrix
//! solver against a brute-force solve of the reduced problem.

use qot::linalg::DensityMatrix;
use qot::lindblad::two_point;
use qot::oracle::diagonal_oracle;
use qot::primal::{solve_primal, TransportProblem};

fn main() -> qot::error::Result<()> {
    for epsilon in [0.0, 0.1] {
        let problem = TransportProblem::kms(
            two_point(0.3)?,
            DensityMatrix::diagonal(&[0.4, 1.6])?,
            DensityMatrix::diagonal(&[1.0, 1.0])?,
            epsilon,
            16,
        )?;
        let full = solve_primal(&problem)?.action;
        let oracle = diagonal_oracle(&problem)?;
        println!("eps={epsilon}: matrix solver {full:.10}, classical oracle (4x grid) {oracle:.10}, rel diff {:.2e}", (full - oracle).abs() / oracle);
    }
    Ok(())
}
