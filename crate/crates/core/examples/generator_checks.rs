//! Builds each preset generator and prints its hypothesis checks.

use qot::lindblad::{
    build_generator, check_cp, check_dbc, check_ergodic, dephasing_free_chain, depolarizing, two_point,
    validate_jump_set,
};

fn main() -> qot::error::Result<()> {
    let presets = [
        ("depolarizing(2)", depolarizing(2)?),
        ("depolarizing(3)", depolarizing(3)?),
        ("two_point(0.3)", two_point(0.3)?),
        ("dephasing_free_chain", dephasing_free_chain(&[0.2, 0.5, 0.3])?),
    ];
    println!("{:<22} {:>10} {:>10} {:>8} {:>12} {:>12}", "preset", "alicki", "dbc", "ergodic", "choi t=0.1", "choi t=1");
    for (name, js) in presets {
        let g = build_generator(&js)?;
        println!(
            "{name:<22} {:>10.1e} {:>10.1e} {:>8} {:>12.3e} {:>12.3e}",
            validate_jump_set(&js)?.worst(),
            check_dbc(&js, 20)?,
            check_ergodic(&g).ergodic,
            check_cp(&g, 0.1)?,
            check_cp(&g, 1.0)?,
        );
    }
    Ok(())
}
