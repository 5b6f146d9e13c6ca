//! Discrete Benamou–Brenier problem.
//!
//! Paths live on a uniform grid `t_i = i / N`. On each interval the midpoint
//! density `rho_m` carries the weight and the drift, `rho_dot` is a forward
//! difference, and the velocity is eliminated exactly: the optimal field on the
//! constraint slice is `V = [rho_m] grad A` with `K_{rho_m} A = rho_dot - eps L† rho_m`,
//! so the interval cost is `dt <grad A, [rho_m] grad A>`. What remains is a
//! convex problem in the interior densities, solved by projected descent
//! preconditioned with the block-tridiagonal Gauss–Newton matrix.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::connections::{ConnectionAction, ConnectionFamily, FamilyName, MeanKernel};
use crate::derivation::{divergence, grad, Calculus, VectorField};
use crate::error::{QotError, Result};
use crate::functionals::{fisher_info_hermitian, rel_entropy};
use crate::linalg::{frobenius, CMatrix, DensityMatrix, HermitianMatrix};
use crate::lindblad::{build_generator, Generator, JumpOperatorSet};
use crate::optimize::{project_density, solve_block_tridiagonal};

pub const DEFAULT_GRID: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 500;

const ARMIJO: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub jump_set: JumpOperatorSet,
    pub connection: ConnectionFamily,
    pub rho0: DensityMatrix,
    pub rho1: DensityMatrix,
    pub epsilon: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub positivity_floor: f64,
}

impl TransportProblem {
    pub fn new(
        jump_set: JumpOperatorSet,
        connection: ConnectionFamily,
        rho0: DensityMatrix,
        rho1: DensityMatrix,
        epsilon: f64,
        grid_n: usize,
    ) -> Result<Self> {
        let p = Self {
            jump_set,
            connection,
            rho0,
            rho1,
            epsilon,
            grid_n,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            positivity_floor: DEFAULT_FLOOR,
        };
        p.validate()?;
        Ok(p)
    }

    /// KMS connection bound to the jump set.
    pub fn kms(js: JumpOperatorSet, rho0: DensityMatrix, rho1: DensityMatrix, epsilon: f64, grid_n: usize) -> Result<Self> {
        let conn = ConnectionFamily::kms(&js);
        Self::new(js, conn, rho0, rho1, epsilon, grid_n)
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_positivity_floor(mut self, floor: f64) -> Self {
        self.positivity_floor = floor;
        self
    }

    pub fn with_grid(mut self, grid_n: usize) -> Result<Self> {
        self.grid_n = grid_n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    /// Same problem with the endpoints exchanged.
    pub fn swapped(&self) -> Self {
        let mut p = self.clone();
        std::mem::swap(&mut p.rho0, &mut p.rho1);
        p
    }

    pub fn dim(&self) -> usize {
        self.jump_set.dim()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.grid_n as f64
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.jump_set.dim();
        if self.rho0.dim() != n || self.rho1.dim() != n {
            return Err(QotError::Dimension(format!(
                "endpoints of size {} and {} for a {n}-dimensional algebra",
                self.rho0.dim(),
                self.rho1.dim()
            )));
        }
        for (name, rho) in [("rho0", &self.rho0), ("rho1", &self.rho1)] {
            if !rho.is_strictly_positive() {
                return Err(QotError::Precondition(format!(
                    "{name} must be invertible (min eigenvalue {:.3e})",
                    rho.min_eigenvalue()
                )));
            }
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(QotError::Domain(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if self.grid_n < 2 {
            return Err(QotError::Domain(format!("grid needs at least 2 intervals, got {}", self.grid_n)));
        }
        if !(self.positivity_floor > 0.0) || self.positivity_floor * n as f64 >= n as f64 {
            return Err(QotError::Domain(format!("positivity floor {} out of range", self.positivity_floor)));
        }
        if self.connection.len() != self.jump_set.len() {
            return Err(QotError::Dimension(format!(
                "connection has {} kernels for {} jumps",
                self.connection.len(),
                self.jump_set.len()
            )));
        }
        if self.connection.name() == FamilyName::Kms {
            for (kernel, jump) in self.connection.kernels().iter().zip(self.jump_set.jumps()) {
                match kernel {
                    MeanKernel::Kms { omega } if (omega - jump.omega).abs() <= 1e-12 => {}
                    _ => {
                        return Err(QotError::Validation(
                            "KMS connection frequencies differ from the jump set".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Straight line between the endpoints on the problem grid.
pub fn init_path(problem: &TransportProblem) -> Vec<DensityMatrix> {
    let n = problem.grid_n;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let h = problem.rho0.hermitian().scale(1.0 - t).add(&problem.rho1.hermitian().scale(t));
            DensityMatrix::from_hermitian_unchecked(h)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Elimination {
    pub potential_path: Vec<HermitianMatrix>,
    pub velocity_path: Vec<VectorField>,
    /// `<grad A_i, [rho_m] grad A_i>` per interval.
    pub action_density: Vec<f64>,
    pub action: f64,
}

#[derive(Debug, Clone)]
pub struct PrimalSolution {
    pub rho_path: Vec<DensityMatrix>,
    pub velocity_path: Vec<VectorField>,
    pub potential_path: Vec<HermitianMatrix>,
    pub action_density: Vec<f64>,
    /// Squared distance estimate.
    pub action: f64,
    pub continuity_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PrimalSolution {
    pub fn distance(&self) -> f64 {
        self.action.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BeckerLiValue {
    pub value: f64,
    pub kinetic: f64,
    pub fisher: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone)]
pub struct BeckerLiSolution {
    pub value: BeckerLiValue,
    /// Drift-free path; `action` holds the kinetic plus Fisher integral.
    pub path: PrimalSolution,
}

/// Objective variant: drift inside the constraint, or drift-free with a Fisher penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Standard,
    BeckerLi,
}

pub(crate) struct Discretization<'a> {
    pub problem: &'a TransportProblem,
    pub calc: Calculus,
    pub generator: Generator,
    /// Coordinates of `L† 1`.
    drift_identity: DVector<f64>,
    /// Column `a` holds the coordinates of `L† G_a`.
    drift: DMatrix<f64>,
    kms: Option<ConnectionFamily>,
    mode: Mode,
}

pub(crate) struct IntervalEval {
    pub rho_mid: HermitianMatrix,
    pub action: ConnectionAction,
    pub k: DMatrix<f64>,
    /// Potential coordinates `K^{-1} c`.
    pub y: DVector<f64>,
    pub kinetic: f64,
    pub fisher: f64,
}

struct PathEval {
    intervals: Vec<IntervalEval>,
    value: f64,
}

impl<'a> Discretization<'a> {
    fn with_mode(problem: &'a TransportProblem, mode: Mode) -> Result<Self> {
        problem.validate()?;
        let calc = Calculus::new(&problem.jump_set)?;
        let generator = build_generator(&problem.jump_set)?;
        let n = problem.dim();
        let drift_identity = calc.coords(&generator.apply_adjoint(&CMatrix::identity(n, n)));
        let m = calc.basis().len();
        let mut drift = DMatrix::zeros(m, m);
        for (a, g) in calc.basis().iter().enumerate() {
            drift.set_column(a, &calc.coords(&generator.apply_adjoint(g)));
        }
        let kms = match mode {
            Mode::BeckerLi => Some(ConnectionFamily::kms(&problem.jump_set)),
            Mode::Standard => None,
        };
        Ok(Self { problem, calc, generator, drift_identity, drift, kms, mode })
    }

    pub fn new(problem: &'a TransportProblem) -> Result<Self> {
        Self::with_mode(problem, Mode::Standard)
    }

    fn drift_epsilon(&self) -> f64 {
        match self.mode {
            Mode::Standard => self.problem.epsilon,
            Mode::BeckerLi => 0.0,
        }
    }

    fn fisher_weight(&self) -> f64 {
        match self.mode {
            Mode::Standard => 0.0,
            Mode::BeckerLi => self.problem.epsilon * self.problem.epsilon,
        }
    }

    pub fn density(&self, x: &DVector<f64>) -> HermitianMatrix {
        let n = self.problem.dim();
        HermitianMatrix::from_hermitian_part(&(CMatrix::identity(n, n) + self.calc.from_coords(x)))
    }

    pub fn coords(&self, rho: &HermitianMatrix) -> DVector<f64> {
        self.calc.coords(rho.as_matrix())
    }

    /// Coordinates of `rho_dot - eps L† rho_m` for an interval.
    fn rhs(&self, xl: &DVector<f64>, xr: &DVector<f64>) -> DVector<f64> {
        let dt = self.problem.dt();
        let eps = self.drift_epsilon();
        let mut c = (xr - xl) / dt;
        if eps != 0.0 {
            let mid = (xl + xr) * 0.5;
            c -= (&self.drift_identity + &self.drift * mid) * eps;
        }
        c
    }

    /// `None` when the midpoint leaves the positive cone or the Laplacian degenerates.
    fn interval(&self, xl: &DVector<f64>, xr: &DVector<f64>) -> Option<IntervalEval> {
        let rho_mid = self.density(&((xl + xr) * 0.5));
        if rho_mid.min_eigenvalue() <= 0.0 {
            return None;
        }
        let action = self.problem.connection.prepare(&rho_mid).ok()?;
        let k = self.calc.laplacian_matrix(&action);
        let c = self.rhs(xl, xr);
        let y = self.calc.solve_coords(k.clone(), &c).ok()?;
        let kinetic = c.dot(&y);
        let fisher = match &self.kms {
            Some(kms) if self.fisher_weight() > 0.0 => {
                fisher_info_hermitian(&self.problem.jump_set, kms, &rho_mid).ok()?
            }
            _ => 0.0,
        };
        Some(IntervalEval { rho_mid, action, k, y, kinetic, fisher })
    }

    fn evaluate(&self, nodes: &[DVector<f64>]) -> Option<PathEval> {
        let intervals: Vec<Option<IntervalEval>> =
            (0..nodes.len() - 1).into_par_iter().map(|i| self.interval(&nodes[i], &nodes[i + 1])).collect();
        let intervals: Vec<IntervalEval> = intervals.into_iter().collect::<Option<_>>()?;
        let dt = self.problem.dt();
        let fw = self.fisher_weight();
        let value = intervals.iter().map(|iv| dt * (iv.kinetic + fw * iv.fisher)).sum();
        Some(PathEval { intervals, value })
    }

    /// Derivative of the interval cost in `rho_m` along each basis direction, at fixed potential.
    fn midpoint_sensitivity(&self, iv: &IntervalEval) -> DVector<f64> {
        let dt = self.problem.dt();
        let field = self.potential_field(&iv.y);
        let g = iv.action.quadratic_form_gradient(&field).expect("component counts checked");
        let mut sens = self.calc.coords(g.as_matrix()) * (-dt);
        let fw = self.fisher_weight();
        if fw > 0.0 {
            let kms = self.kms.as_ref().expect("Fisher mode carries the KMS family");
            let n = self.problem.dim();
            let h = FD_STEP.min(0.25 * iv.rho_mid.min_eigenvalue() / (n as f64).sqrt());
            let fi = |r: &HermitianMatrix| fisher_info_hermitian(&self.problem.jump_set, kms, r).unwrap_or(f64::NAN);
            for (a, basis) in self.calc.basis().iter().enumerate() {
                let dir = HermitianMatrix::from_hermitian_part(basis).scale(h);
                sens[a] += dt * fw * (fi(&iv.rho_mid.add(&dir)) - fi(&iv.rho_mid.sub(&dir))) / (2.0 * h);
            }
        }
        sens
    }

    pub fn potential_field(&self, y: &DVector<f64>) -> VectorField {
        let n = self.problem.dim();
        let mut comps = vec![CMatrix::zeros(n, n); self.problem.jump_set.len()];
        for (g, &coef) in self.calc.basis_grads().iter().zip(y.iter()) {
            for (acc, comp) in comps.iter_mut().zip(g.components()) {
                *acc += comp.scale(coef);
            }
        }
        VectorField::new(comps)
    }

    /// Gradient with respect to the interior node coordinates.
    fn gradient(&self, eval: &PathEval) -> Vec<DVector<f64>> {
        let dt = self.problem.dt();
        let eps = self.drift_epsilon();
        let n_int = eval.intervals.len();
        let parts: Vec<(DVector<f64>, DVector<f64>)> = eval
            .intervals
            .par_iter()
            .map(|iv| {
                let sens = self.midpoint_sensitivity(iv) * 0.5;
                let drift_part = self.drift.transpose() * &iv.y * (eps * dt);
                let left = -&iv.y * 2.0 - &drift_part + &sens;
                let right = &iv.y * 2.0 - &drift_part + &sens;
                (left, right)
            })
            .collect();
        (1..n_int).map(|i| &parts[i - 1].1 + &parts[i].0).collect()
    }

    /// Inverse Laplacian blocks assembled into the Gauss–Newton matrix.
    fn preconditioned_direction(&self, eval: &PathEval, g: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let dt = self.problem.dt();
        let inv: Vec<DMatrix<f64>> = eval
            .intervals
            .iter()
            .map(|iv| {
                nalgebra::Cholesky::new(iv.k.clone())
                    .map(|c| c.inverse())
                    .ok_or_else(|| QotError::Domain("weighted Laplacian lost definiteness".into()))
            })
            .collect::<Result<_>>()?;
        let k = g.len();
        let diag: Vec<DMatrix<f64>> = (0..k).map(|i| (&inv[i] + &inv[i + 1]) * (2.0 / dt)).collect();
        let lower: Vec<DMatrix<f64>> = (1..k).map(|i| &inv[i] * (-2.0 / dt)).collect();
        let rhs: Vec<DVector<f64>> = g.iter().map(|v| -v).collect();
        solve_block_tridiagonal(&diag, &lower, &rhs)
    }

    fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.problem.dim();
        let h = CMatrix::identity(n, n) + self.calc.from_coords(x);
        Ok(self.coords(&project_density(&h, self.problem.positivity_floor)?))
    }

    fn endpoint_nodes(&self, path: &[DensityMatrix]) -> Vec<DVector<f64>> {
        path.iter().map(|r| self.coords(r.hermitian())).collect()
    }

    fn minimize(&self, nodes: &mut [DVector<f64>]) -> Result<(PathEval, usize, bool)> {
        let tol = self.problem.tol;
        let mut eval = self
            .evaluate(nodes)
            .ok_or_else(|| QotError::Domain("initial path leaves the positive cone".into()))?;
        let last = nodes.len() - 1;
        for iter in 0..self.problem.max_iter {
            let g = self.gradient(&eval);
            let d = self.preconditioned_direction(&eval, &g)?;
            let decrement: f64 = -g.iter().zip(&d).map(|(a, b)| a.dot(b)).sum::<f64>();
            let scale = eval.value.abs().max(1e-12);
            if decrement <= tol * scale || !decrement.is_finite() {
                return Ok((eval, iter, decrement.is_finite()));
            }
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-12 {
                let mut trial = nodes.to_vec();
                for i in 1..last {
                    trial[i] = self.project(&(&nodes[i] + &d[i - 1] * t))?;
                }
                let slope: f64 = (1..last).map(|i| g[i - 1].dot(&(&trial[i] - &nodes[i]))).sum();
                if let Some(te) = self.evaluate(&trial) {
                    if te.value <= eval.value + ARMIJO * slope {
                        accepted = Some((trial, te));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((trial, te)) = accepted else {
                return Ok((eval, iter, decrement <= tol.sqrt() * scale));
            };
            let decrease = eval.value - te.value;
            nodes.clone_from_slice(&trial);
            eval = te;
            if decrease <= tol * scale * 1e-2 {
                return Ok((eval, iter + 1, true));
            }
        }
        Ok((eval, self.problem.max_iter, false))
    }

    fn solution(&self, nodes: &[DVector<f64>], eval: &PathEval, iterations: usize, converged: bool) -> PrimalSolution {
        let last = nodes.len() - 1;
        let rho_path: Vec<DensityMatrix> = nodes
            .iter()
            .enumerate()
            .map(|(i, x)| match i {
                0 => self.problem.rho0.clone(),
                i if i == last => self.problem.rho1.clone(),
                _ => DensityMatrix::from_hermitian_unchecked(self.density(x)),
            })
            .collect();
        let elim = self.elimination(eval);
        let continuity_residual = self.continuity_residual(&rho_path, &elim.velocity_path);
        PrimalSolution {
            rho_path,
            velocity_path: elim.velocity_path,
            potential_path: elim.potential_path,
            action_density: elim.action_density,
            action: eval.value,
            continuity_residual,
            iterations,
            converged,
        }
    }

    fn elimination(&self, eval: &PathEval) -> Elimination {
        let potential_path: Vec<HermitianMatrix> = eval
            .intervals
            .iter()
            .map(|iv| HermitianMatrix::from_hermitian_part(&self.calc.from_coords(&iv.y)))
            .collect();
        let velocity_path = eval
            .intervals
            .iter()
            .map(|iv| iv.action.apply(&self.potential_field(&iv.y)).expect("component counts checked"))
            .collect();
        let action_density: Vec<f64> = eval.intervals.iter().map(|iv| iv.kinetic).collect();
        let dt = self.problem.dt();
        Elimination { potential_path, velocity_path, action: action_density.iter().sum::<f64>() * dt, action_density }
    }

    /// Largest `|| rho_dot + div V - eps L† rho_m ||` over intervals.
    fn continuity_residual(&self, path: &[DensityMatrix], velocities: &[VectorField]) -> f64 {
        let dt = self.problem.dt();
        let eps = self.drift_epsilon();
        path.windows(2)
            .zip(velocities)
            .map(|(w, v)| {
                let rho_dot = (w[1].as_matrix() - w[0].as_matrix()) / crate::linalg::c(dt);
                let mid = (w[0].as_matrix() + w[1].as_matrix()) * crate::linalg::c(0.5);
                let div = divergence(&self.problem.jump_set, v).expect("component counts checked");
                let drift = self.generator.apply_adjoint(&mid) * crate::linalg::c(eps);
                frobenius(&(rho_dot + div - drift))
            })
            .fold(0.0, f64::max)
    }
}

fn check_path(problem: &TransportProblem, path: &[DensityMatrix]) -> Result<()> {
    if path.len() != problem.grid_n + 1 {
        return Err(QotError::Dimension(format!("path has {} nodes, grid needs {}", path.len(), problem.grid_n + 1)));
    }
    let ends = [(&path[0], &problem.rho0), (&path[path.len() - 1], &problem.rho1)];
    for (got, want) in ends {
        if frobenius(&(got.as_matrix() - want.as_matrix())) > 1e-12 {
            return Err(QotError::Validation("path endpoints differ from the problem endpoints".into()));
        }
    }
    for rho in path {
        if !rho.is_strictly_positive() {
            return Err(QotError::Precondition("path must stay strictly positive".into()));
        }
    }
    Ok(())
}

/// Potentials, velocities and action of a fixed path.
pub fn eliminate_velocity(problem: &TransportProblem, rho_path: &[DensityMatrix]) -> Result<Elimination> {
    check_path(problem, rho_path)?;
    let disc = Discretization::new(problem)?;
    let nodes = disc.endpoint_nodes(rho_path);
    let eval = disc
        .evaluate(&nodes)
        .ok_or_else(|| QotError::Domain("weighted Laplacian is singular along the path".into()))?;
    Ok(disc.elimination(&eval))
}

/// Continuity residual of a path and velocity field against the problem's drift.
pub fn continuity_residual(problem: &TransportProblem, path: &[DensityMatrix], velocities: &[VectorField]) -> Result<f64> {
    let disc = Discretization::new(problem)?;
    Ok(disc.continuity_residual(path, velocities))
}

pub fn solve_primal(problem: &TransportProblem) -> Result<PrimalSolution> {
    solve_primal_from(problem, &init_path(problem))
}

/// Primal descent started from a given feasible path.
pub fn solve_primal_from(problem: &TransportProblem, start: &[DensityMatrix]) -> Result<PrimalSolution> {
    check_path(problem, start)?;
    let disc = Discretization::new(problem)?;
    let mut nodes = disc.endpoint_nodes(start);
    let (eval, iterations, converged) = disc.minimize(&mut nodes)?;
    Ok(disc.solution(&nodes, &eval, iterations, converged))
}

/// Drift-free formulation with a Fisher penalty and an entropy boundary term.
pub fn solve_primal_becker_li(problem: &TransportProblem) -> Result<BeckerLiSolution> {
    if problem.connection.name() != FamilyName::Kms {
        return Err(QotError::Unsupported(
            "the entropy reformulation holds for the KMS connection only".into(),
        ));
    }
    let disc = Discretization::with_mode(problem, Mode::BeckerLi)?;
    let mut nodes = disc.endpoint_nodes(&init_path(problem));
    let (eval, iterations, converged) = disc.minimize(&mut nodes)?;
    let dt = problem.dt();
    let kinetic: f64 = eval.intervals.iter().map(|iv| dt * iv.kinetic).sum();
    let fisher: f64 = eval.intervals.iter().map(|iv| dt * disc.fisher_weight() * iv.fisher).sum();
    let sigma = problem.jump_set.sigma();
    let boundary = 2.0 * problem.epsilon * (rel_entropy(&problem.rho1, sigma)? - rel_entropy(&problem.rho0, sigma)?);
    let path = disc.solution(&nodes, &eval, iterations, converged);
    Ok(BeckerLiSolution { value: BeckerLiValue { value: kinetic + fisher + boundary, kinetic, fisher, boundary }, path })
}

/// Reduced objective of a path, `+inf` when it leaves the positive cone.
pub fn reduced_objective(problem: &TransportProblem, path: &[DensityMatrix]) -> Result<f64> {
    let disc = Discretization::new(problem)?;
    let nodes = disc.endpoint_nodes(path);
    Ok(disc.evaluate(&nodes).map(|e| e.value).unwrap_or(f64::INFINITY))
}

/// `grad A` for a potential, exposed for reporting.
pub fn potential_gradient(problem: &TransportProblem, a: &HermitianMatrix) -> VectorField {
    grad(&problem.jump_set, a.as_matrix())
}
