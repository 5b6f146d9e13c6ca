//! Writes a problem file with an explicit jump set and runs the `gap`
//! command on it, as the `qot` binary would.

use std::fs;

fn main() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join("qot-problem-file-example");
    fs::create_dir_all(&dir)?;
    let p = 0.3f64;
    // sigma E_01 sigma^-1 = e^-omega E_01
    let omega = ((1.0 - p) / p).ln();
    // two-level system written in unit trace: sigma = diag(p, 1-p), jumps sqrt(2) E_01 and sqrt(2) E_10
    let s = std::f64::consts::SQRT_2;
    let problem = format!(
        r#"{{
  "algebra_dim": 2,
  "generator": {{
    "sigma": [[[{a}, 0], [0, 0]], [[0, 0], [{b}, 0]]],
    "jumps": [
      {{"V": [[[0, 0], [{s}, 0]], [[0, 0], [0, 0]]], "omega": {omega}}},
      {{"V": [[[0, 0], [0, 0]], [[{s}, 0], [0, 0]]], "omega": {neg}}}
    ]
  }},
  "rho0": [[[0.2, 0], [0, 0]], [[0, 0], [0.8, 0]]],
  "rho1": [[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]],
  "trace_convention": "unit",
  "epsilon": 0.1,
  "grid_n": 16
}}"#,
        a = p,
        b = 1.0 - p,
        neg = -omega,
    );
    let path = dir.join("two_level.json");
    fs::write(&path, problem)?;
    let code = qot::cli::run(["qot", "gap", path.to_str().expect("utf-8 path")]);
    eprintln!("exit code {code}; outputs in {}", dir.display());
    Ok(())
}
