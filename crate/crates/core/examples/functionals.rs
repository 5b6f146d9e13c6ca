//! Relative entropy and Fisher information along the dual semigroup.

use qot::functionals::{fisher_info, rel_entropy};
use qot::linalg::{DensityMatrix, HermitianMatrix};
use qot::lindblad::{build_generator, dephasing_free_chain, semigroup};

fn main() -> qot::error::Result<()> {
    let js = dephasing_free_chain(&[0.2, 0.5, 0.3])?;
    let g = build_generator(&js)?;
    let rho = DensityMatrix::diagonal(&[2.4, 0.3, 0.3])?;
    println!("{:>5} {:>12} {:>12}", "t", "entropy", "fisher");
    for k in 0..=8 {
        let t = 0.05 * k as f64;
        let evolved = semigroup(&g, t)?.adjoint().apply(rho.as_matrix());
        let state = DensityMatrix::new(HermitianMatrix::new(evolved)?)?;
        println!("{t:>5.2} {:>12.6} {:>12.6}", rel_entropy(&state, js.sigma())?, fisher_info(&js, &state)?);
    }
    Ok(())
}
