//! Batch front end: problem files in, JSON reports and CSV trajectories out.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 parse failure,
//! 3 a solver stopped before converging (the report is still written).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::connections::{connection_axioms, ConnectionFamily, FamilyName, MeanKernel};
use crate::dual::{relative_gap, solve_dual_seeded, DualSolution};
use crate::error::{QotError, Result};
use crate::functionals::{functional_report, FunctionalReport};
use crate::linalg::{c, CMatrix, DensityMatrix, HermitianMatrix};
use crate::lindblad::{
    build_generator, check_cp, check_dbc, check_ergodic, preset, validate_jump_set, Jump, JumpOperatorSet,
};
use crate::primal::{
    solve_primal, solve_primal_becker_li, PrimalSolution, TransportProblem, DEFAULT_FLOOR, DEFAULT_GRID,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

const DBC_TOL: f64 = 1e-9;
const CP_TOL: f64 = 1e-9;
const AXIOM_TOL: f64 = 1e-9;
const DBC_SAMPLES: usize = 20;
const AXIOM_TRIALS: usize = 20;

/// Row-major `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(QotError::Parse("empty matrix".into()));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(QotError::Parse(format!("matrix row {i} has {} entries, expected {n}", row.len())));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| c(rows[i][j][0]) + crate::linalg::C64::new(0.0, rows[i][j][1])))
}

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TraceConvention {
    #[default]
    Normalized,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionChoice {
    #[default]
    Kms,
    Arithmetic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpJson {
    #[serde(rename = "V")]
    pub v: MatrixJson,
    pub omega: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    Preset {
        preset: String,
        #[serde(default)]
        params: Value,
    },
    Explicit {
        sigma: MatrixJson,
        jumps: Vec<JumpJson>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        involution: Option<Vec<usize>>,
    },
}

fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_floor() -> f64 {
    DEFAULT_FLOOR
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

/// Problem file; after flag overrides it doubles as the resolved configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub algebra_dim: usize,
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub connection: ConnectionChoice,
    pub rho0: MatrixJson,
    pub rho1: MatrixJson,
    #[serde(default)]
    pub trace_convention: TraceConvention,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_floor")]
    pub positivity_floor: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QotError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QotError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn density(&self, rows: &MatrixJson, name: &str, notices: &mut Vec<String>) -> Result<DensityMatrix> {
        let m = matrix_from_json(rows)?;
        if m.nrows() != self.algebra_dim {
            return Err(QotError::Dimension(format!("{name} is {0}x{0}, algebra_dim is {1}", m.nrows(), self.algebra_dim)));
        }
        let h = HermitianMatrix::new(m)?;
        match self.trace_convention {
            TraceConvention::Normalized => DensityMatrix::new(h),
            TraceConvention::Unit => {
                notices.push(format!("{name}: unit-trace input rescaled by {}", self.algebra_dim));
                DensityMatrix::from_unit_trace(h)
            }
        }
    }

    pub fn jump_set(&self, notices: &mut Vec<String>) -> Result<JumpOperatorSet> {
        let js = match &self.generator {
            GeneratorSpec::Preset { preset: name, params } => preset(name, params)?,
            GeneratorSpec::Explicit { sigma, jumps, involution } => {
                let sigma = self.density(sigma, "sigma", notices)?;
                let jumps = jumps
                    .iter()
                    .map(|j| Ok(Jump::new(matrix_from_json(&j.v)?, j.omega)))
                    .collect::<Result<Vec<_>>>()?;
                match involution {
                    Some(inv) => JumpOperatorSet::new(sigma, jumps, inv.clone())?,
                    None => JumpOperatorSet::with_inferred_involution(sigma, jumps)?,
                }
            }
        };
        if js.dim() != self.algebra_dim {
            return Err(QotError::Dimension(format!("generator acts on {}x{}, algebra_dim is {}", js.dim(), js.dim(), self.algebra_dim)));
        }
        Ok(js)
    }

    pub fn problem(&self, notices: &mut Vec<String>) -> Result<TransportProblem> {
        let js = self.jump_set(notices)?;
        let rho0 = self.density(&self.rho0, "rho0", notices)?;
        let rho1 = self.density(&self.rho1, "rho1", notices)?;
        let connection = match self.connection {
            ConnectionChoice::Kms => ConnectionFamily::kms(&js),
            ConnectionChoice::Arithmetic => ConnectionFamily::arithmetic(js.len()),
        };
        Ok(TransportProblem::new(js, connection, rho0, rho1, self.epsilon, self.grid_n)?
            .with_tol(self.tol)
            .with_max_iter(self.max_iter)
            .with_positivity_floor(self.positivity_floor))
    }
}

#[derive(Debug, Parser)]
#[command(name = "qot", version, about = "Quantum transport distances for detailed-balance Lindblad semigroups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Directory for the JSON report and CSV trajectories (defaults to the problem file's directory).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub connection: Option<ConnectionChoice>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the generator hypotheses and connection axioms.
    Verify { problem: PathBuf },
    /// Minimize the discrete action.
    Primal { problem: PathBuf },
    /// Maximize over discrete subsolutions.
    Dual { problem: PathBuf },
    /// Primal, warm-started dual, and their relative gap.
    Gap { problem: PathBuf },
    /// Compare the drift formulation with the Fisher-information formulation.
    BeckerLi { problem: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Verify { .. } => "verify",
            Self::Primal { .. } => "primal",
            Self::Dual { .. } => "dual",
            Self::Gap { .. } => "gap",
            Self::BeckerLi { .. } => "becker-li",
        }
    }

    fn problem(&self) -> &Path {
        match self {
            Self::Verify { problem }
            | Self::Primal { problem }
            | Self::Dual { problem }
            | Self::Gap { problem }
            | Self::BeckerLi { problem } => problem,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PrimalBlock {
    pub w2: f64,
    pub w: f64,
    pub continuity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&PrimalSolution> for PrimalBlock {
    fn from(s: &PrimalSolution) -> Self {
        Self {
            w2: s.action,
            w: s.distance(),
            continuity_residual: s.continuity_residual,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualBlock {
    /// Lower bound for half the squared distance.
    pub objective: f64,
    pub worst_violation: f64,
    pub shift: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&DualSolution> for DualBlock {
    fn from(d: &DualSolution) -> Self {
        Self {
            objective: d.objective,
            worst_violation: d.worst_violation,
            shift: d.shift,
            feasible: d.feasible(),
            iterations: d.iterations,
            converged: d.converged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BeckerLiBlock {
    pub standard: f64,
    pub reformulated: f64,
    pub kinetic: f64,
    pub fisher: f64,
    pub boundary: f64,
    pub abs_difference: f64,
    pub rel_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultReport {
    pub command: String,
    pub config: ProblemFile,
    pub notices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal: Option<PrimalBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub functionals: Option<FunctionalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub becker_li: Option<BeckerLiBlock>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    /// Non-fatal conditions such as solvers stopping early.
    pub flags: Vec<String>,
    pub csv: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl ResultReport {
    fn new(command: &str, config: ProblemFile) -> Self {
        Self {
            command: command.into(),
            config,
            notices: Vec::new(),
            primal: None,
            dual: None,
            relative_gap: None,
            functionals: None,
            becker_li: None,
            checks: Vec::new(),
            flags: Vec::new(),
            csv: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| !c.passed) {
            EXIT_INVALID
        } else if self.flags.iter().any(|f| f.ends_with("not_converged")) {
            EXIT_NOT_CONVERGED
        } else {
            EXIT_OK
        }
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings_ms.insert(label.into(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

pub fn exit_code_for(err: &QotError) -> i32 {
    match err {
        QotError::Parse(_) => EXIT_PARSE,
        _ => EXIT_INVALID,
    }
}

fn check(name: &str, value: f64, threshold: f64, passed: bool) -> Check {
    Check { name: name.into(), value, threshold, passed }
}

fn verify(report: &mut ResultReport) -> Result<()> {
    let cfg = report.config.clone();
    let js = cfg.jump_set(&mut report.notices)?;
    let v = validate_jump_set(&js)?;
    report.checks.push(check("jump_set", v.worst(), crate::lindblad::JUMP_TOL, v.passes()));
    let dbc = check_dbc(&js, DBC_SAMPLES)?;
    report.checks.push(check("detailed_balance", dbc, DBC_TOL, dbc < DBC_TOL));
    let g = build_generator(&js)?;
    let erg = check_ergodic(&g);
    report.checks.push(check("ergodic", erg.kernel_dim as f64, 1.0, erg.ergodic));
    for t in [0.1, 1.0] {
        let cp = check_cp(&g, t)?;
        report.checks.push(check(&format!("complete_positivity_t{t}"), cp, -CP_TOL, cp >= -CP_TOL));
    }
    let kernels: Vec<MeanKernel> = match cfg.connection {
        ConnectionChoice::Kms => {
            let mut omegas: Vec<f64> = js.omegas();
            omegas.sort_by(f64::total_cmp);
            omegas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
            omegas.into_iter().map(|omega| MeanKernel::Kms { omega }).collect()
        }
        ConnectionChoice::Arithmetic => vec![MeanKernel::Arithmetic],
    };
    for kernel in &kernels {
        let axioms = connection_axioms(kernel, js.dim(), AXIOM_TRIALS, cfg.seed)?;
        let name = match kernel {
            MeanKernel::Kms { omega } => format!("connection_axioms_kms_{omega}"),
            _ => "connection_axioms_arithmetic".into(),
        };
        report.checks.push(check(&name, axioms.worst_margin(), -AXIOM_TOL, axioms.passes(AXIOM_TOL)));
    }
    for (name, rows) in [("rho0", &cfg.rho0), ("rho1", &cfg.rho1)] {
        let rho = cfg.density(rows, name, &mut report.notices)?;
        let lam = rho.min_eigenvalue();
        report.checks.push(check(&format!("{name}_invertible"), lam, 0.0, lam > 0.0));
    }
    Ok(())
}

fn require_valid(js: &JumpOperatorSet) -> Result<()> {
    let v = validate_jump_set(js)?;
    if !v.passes() {
        return Err(QotError::Validation(format!("jump set fails: {}", v.failures().join(", "))));
    }
    Ok(())
}

struct Outputs {
    dir: PathBuf,
    stem: String,
}

impl Outputs {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.stem))
    }
}

fn header(prefix: &str, n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * n * n);
    for k in 0..n {
        for l in 0..n {
            cols.push(format!("{prefix}_{k}_{l}_re"));
            cols.push(format!("{prefix}_{k}_{l}_im"));
        }
    }
    cols
}

fn entries(m: &CMatrix) -> impl Iterator<Item = String> + '_ {
    (0..m.nrows()).flat_map(move |k| (0..m.ncols()).flat_map(move |l| [m[(k, l)].re.to_string(), m[(k, l)].im.to_string()]))
}

fn csv_error(e: csv::Error) -> QotError {
    QotError::Io(std::io::Error::other(e))
}

/// One row per grid node: `t`, vectorized density, action density of the interval starting there.
pub fn write_rho_path_csv(path: &Path, solution: &PrimalSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let n = solution.rho_path[0].dim();
    let grid = solution.rho_path.len() - 1;
    let mut head = vec!["t".to_string()];
    head.extend(header("rho", n));
    head.push("action_density".into());
    w.write_record(&head).map_err(csv_error)?;
    for (i, rho) in solution.rho_path.iter().enumerate() {
        let mut row = vec![(i as f64 / grid as f64).to_string()];
        row.extend(entries(rho.as_matrix()));
        row.push(solution.action_density.get(i).map(f64::to_string).unwrap_or_default());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid node: `t` and the vectorized potential.
pub fn write_potentials_csv(path: &Path, dual: &DualSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let n = dual.node_potentials[0].dim();
    let grid = dual.node_potentials.len() - 1;
    let mut head = vec!["t".to_string()];
    head.extend(header("a", n));
    w.write_record(&head).map_err(csv_error)?;
    for (i, a) in dual.node_potentials.iter().enumerate() {
        let mut row = vec![(i as f64 / grid as f64).to_string()];
        row.extend(entries(a.as_matrix()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per interval: midpoint time and the density attaining the constraint supremum.
pub fn write_witnesses_csv(path: &Path, dual: &DualSolution) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let n = dual.witness_densities[0].dim();
    let grid = dual.witness_densities.len();
    let mut head = vec!["t_mid".to_string()];
    head.extend(header("rho", n));
    w.write_record(&head).map_err(csv_error)?;
    for (i, rho) in dual.witness_densities.iter().enumerate() {
        let mut row = vec![((i as f64 + 0.5) / grid as f64).to_string()];
        row.extend(entries(rho.as_matrix()));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn run_primal(report: &mut ResultReport, problem: &TransportProblem, out: &Outputs) -> Result<PrimalSolution> {
    let s = report.timed("primal", || solve_primal(problem))?;
    if !s.converged {
        report.flags.push("primal_not_converged".into());
    }
    report.primal = Some(PrimalBlock::from(&s));
    if problem.connection.name() == FamilyName::Kms {
        report.functionals = Some(functional_report(&problem.jump_set, &s.rho_path)?);
    }
    let path = out.path("rho_path.csv");
    write_rho_path_csv(&path, &s)?;
    report.csv.push(path);
    Ok(s)
}

fn run_dual(
    report: &mut ResultReport,
    problem: &TransportProblem,
    warm: Option<&PrimalSolution>,
    out: &Outputs,
) -> Result<DualSolution> {
    let seed = report.config.seed;
    let d = report.timed("dual", || solve_dual_seeded(problem, warm, seed))?;
    if !d.converged {
        report.flags.push("dual_not_converged".into());
    }
    if !d.feasible() {
        report.flags.push("dual_infeasible".into());
    }
    report.dual = Some(DualBlock::from(&d));
    for (suffix, write) in [
        ("potentials.csv", write_potentials_csv as fn(&Path, &DualSolution) -> Result<()>),
        ("witnesses.csv", write_witnesses_csv),
    ] {
        let path = out.path(suffix);
        write(&path, &d)?;
        report.csv.push(path);
    }
    Ok(d)
}

fn run_command(command: &Command, report: &mut ResultReport, out: &Outputs) -> Result<()> {
    if let Command::Verify { .. } = command {
        return verify(report);
    }
    let cfg = report.config.clone();
    let problem = cfg.problem(&mut report.notices)?;
    require_valid(&problem.jump_set)?;
    match command {
        Command::Primal { .. } => {
            run_primal(report, &problem, out)?;
        }
        Command::Dual { .. } => {
            run_dual(report, &problem, None, out)?;
        }
        Command::Gap { .. } => {
            let p = run_primal(report, &problem, out)?;
            let d = run_dual(report, &problem, Some(&p), out)?;
            report.relative_gap = Some(relative_gap(p.action, d.objective));
        }
        Command::BeckerLi { .. } => {
            if problem.connection.name() != FamilyName::Kms {
                return Err(QotError::Unsupported("the Fisher-information formulation needs the kms connection".into()));
            }
            let standard = run_primal(report, &problem, out)?;
            let bl = report.timed("becker_li", || solve_primal_becker_li(&problem))?;
            if !bl.path.converged {
                report.flags.push("becker_li_not_converged".into());
            }
            let diff = (standard.action - bl.value.value).abs();
            report.becker_li = Some(BeckerLiBlock {
                standard: standard.action,
                reformulated: bl.value.value,
                kinetic: bl.value.kinetic,
                fisher: bl.value.fisher,
                boundary: bl.value.boundary,
                abs_difference: diff,
                rel_difference: diff / standard.action.abs().max(1e-12),
            });
        }
        Command::Verify { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn apply_overrides(cli: &Cli, cfg: &mut ProblemFile) {
    if let Some(g) = cli.grid {
        cfg.grid_n = g;
    }
    if let Some(e) = cli.epsilon {
        cfg.epsilon = e;
    }
    if let Some(conn) = cli.connection {
        cfg.connection = conn;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.max_iter {
        cfg.max_iter = m;
    }
}

/// Runs a parsed invocation; returns the report (when one could be built) and the exit code.
pub fn execute(cli: &Cli) -> (Option<ResultReport>, i32) {
    let path = cli.command.problem();
    let mut cfg = match ProblemFile::load(path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return (None, exit_code_for(&e));
        }
    };
    apply_overrides(cli, &mut cfg);
    let dir = cli.out.clone().unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "problem".into());
    let out = Outputs { dir, stem };
    let mut report = ResultReport::new(cli.command.name(), cfg);
    let mut code = match fs::create_dir_all(&out.dir).map_err(QotError::from).and_then(|_| run_command(&cli.command, &mut report, &out)) {
        Ok(()) => report.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            report.flags.push(format!("error: {e}"));
            exit_code_for(&e)
        }
    };
    for notice in &report.notices {
        eprintln!("notice: {notice}");
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let report_path = out.path(&format!("{}.json", report.command));
    if let Err(e) = fs::write(&report_path, &json) {
        eprintln!("error: cannot write {}: {e}", report_path.display());
        code = code.max(EXIT_INVALID);
    }
    println!("{json}");
    (Some(report), code)
}

fn configure_threads() {
    if let Some(k) = std::env::var("QOT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&k| k > 0) {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
}

/// Entry point shared by the binary and tests.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    configure_threads();
    execute(&cli).1
}
