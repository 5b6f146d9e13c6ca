//! Discrete Hamilton–Jacobi–Bellman subsolutions.
//!
//! Node potentials `A_0, ..., A_N` are constrained interval by interval:
//! with `A_dot = (A_{i+1} - A_i) / dt` and `A_m = (A_i + A_{i+1}) / 2`,
//!
//! ```text
//! sup_rho  tau((A_dot + eps L A_m) rho) + 1/2 <grad A_m, [rho] grad A_m>  <=  0
//! ```
//!
//! over all densities. The pairing matches the primal discretization, so the
//! discrete product rule gives `tau(A_N rho_1) - tau(A_0 rho_0) <= action / 2`
//! exactly for every primal path and every feasible potential.
//!
//! The trace of each node potential only shifts the constraint by a constant,
//! so it is eliminated in closed form: making every constraint tight leaves an
//! unconstrained concave maximization over traceless potentials, whose
//! gradient comes from the maximizing densities.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::derivation::{grad, Calculus, VectorField};
use crate::error::{QotError, Result};
use crate::linalg::{c, frobenius, trace_product, CMatrix, DensityMatrix, EigenBasis, HermitianMatrix};
use crate::lindblad::{build_generator, Generator};
use crate::optimize::project_density;
use crate::primal::{eliminate_velocity, init_path, PrimalSolution, TransportProblem};
use crate::sampling::{random_density, rng};

/// Largest certified constraint value for a solution to count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Stationarity threshold of the inner ascent (gradient-mapping norm).
pub const ASCENT_TOL: f64 = 1e-9;
/// Smallest eigenvalue allowed during the inner ascent; the KMS gradient is unbounded at singular states.
const ASCENT_FLOOR: f64 = 1e-12;
pub const CERTIFY_RESTARTS: usize = 5;
const MAX_ASCENT: usize = 20_000;

#[derive(Debug, Clone)]
pub struct HjbViolation {
    pub value: f64,
    pub witness: DensityMatrix,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub node_potentials: Vec<HermitianMatrix>,
    pub objective: f64,
    /// Largest certified constraint value; at most zero once the feasibility shift is applied.
    pub worst_violation: f64,
    pub witness_densities: Vec<DensityMatrix>,
    /// Slope of the `-shift * t * 1` correction added during certification.
    pub shift: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DualSolution {
    pub fn feasible(&self) -> bool {
        self.worst_violation <= FEASIBILITY_TOL
    }
}

/// `tau(A_N rho_1) - tau(A_0 rho_0)`.
pub fn dual_objective(path: &[HermitianMatrix], rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    let (first, last) = match (path.first(), path.last()) {
        (Some(f), Some(l)) if path.len() >= 2 => (f, l),
        _ => return Err(QotError::Dimension("potential path needs at least two nodes".into())),
    };
    Ok(trace_product(last.as_matrix(), rho1.as_matrix()).re - trace_product(first.as_matrix(), rho0.as_matrix()).re)
}

/// Concave function `c(rho) = tau(M rho) + 1/2 <X, [rho] X>` on the density set.
struct IntervalHjb<'a> {
    problem: &'a TransportProblem,
    linear: CMatrix,
    field: VectorField,
}

impl IntervalHjb<'_> {
    fn eval(&self, rho: &HermitianMatrix) -> Result<(f64, CMatrix)> {
        let action = self.problem.connection.prepare(rho)?;
        let q = action.quadratic_form(&self.field)?;
        let g = action.quadratic_form_gradient(&self.field)?;
        let value = trace_product(&self.linear, rho.as_matrix()).re + 0.5 * q;
        Ok((value, &self.linear + g.as_matrix() * c(0.5)))
    }

    /// Exponentiated-gradient ascent `rho <- n exp(log rho + eta g) / tr(...)` with
    /// Armijo backtracking on `eta`. Iterates stay positive definite, where the
    /// KMS gradient is finite.
    fn maximize(&self, start: &HermitianMatrix) -> Result<HjbViolation> {
        let n = self.problem.dim();
        let gns = |m: &CMatrix| frobenius(m) / (n as f64).sqrt();
        let mut rho = project_density(start.as_matrix(), ASCENT_FLOOR)?;
        let mut log_rho = EigenBasis::of(rho.as_matrix()).recombine(|x| x.max(ASCENT_FLOOR).ln());
        let (mut f, mut g) = self.eval(&rho)?;
        let mut eta = 1.0;
        let mut iterations = 0;
        while iterations < MAX_ASCENT {
            let probe = project_density(&(rho.as_matrix() + &g), 0.0)?;
            if gns(&(probe.as_matrix() - rho.as_matrix())) < ASCENT_TOL {
                break;
            }
            iterations += 1;
            let mut first_try = true;
            let accepted = loop {
                let (trial, log_trial) = mirror_step(&log_rho, &g, eta, n);
                let diff = trial.as_matrix() - rho.as_matrix();
                let lin = trace_product(&g, &diff).re;
                let (ft, gt) = self.eval(&trial)?;
                if ft >= f + 1e-4 * lin {
                    break Some((trial, log_trial, ft, gt, diff));
                }
                if eta < 1e-16 || gns(&diff) < 1e-14 {
                    break None;
                }
                eta *= 0.5;
                first_try = false;
            };
            let Some((trial, log_trial, ft, gt, diff)) = accepted else { break };
            if first_try {
                eta = (eta * 2.0).min(1e12);
            }
            let stalled = ft - f <= 1e-15 * f.abs().max(1.0) && gns(&diff) < 1e-13;
            rho = trial;
            log_rho = log_trial;
            f = ft;
            g = gt;
            if stalled {
                break;
            }
        }
        Ok(HjbViolation { value: f, witness: DensityMatrix::from_hermitian_unchecked(rho), iterations })
    }
}

/// One multiplicative step from `log rho` along `g`; eigenvalues are floored and
/// the result rescaled to trace `n`.
fn mirror_step(log_rho: &CMatrix, g: &CMatrix, eta: f64, n: usize) -> (HermitianMatrix, CMatrix) {
    let eig = EigenBasis::of(&(log_rho + g * c(eta)));
    let top = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = eig.values.iter().map(|y| (y - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let floored: Vec<f64> = raw.iter().map(|w| (w * n as f64 / total).max(ASCENT_FLOOR)).collect();
    let renorm = n as f64 / floored.iter().sum::<f64>();
    let weights: Vec<f64> = floored.iter().map(|w| w * renorm).collect();
    let spectral = |f: fn(f64) -> f64| {
        let d = CMatrix::from_diagonal(&DVector::from_iterator(n, weights.iter().map(|&w| c(f(w)))));
        &eig.vectors * d * eig.vectors.adjoint()
    };
    let rho = spectral(|w| w);
    let log = spectral(f64::ln);
    (HermitianMatrix::from_hermitian_part(&rho), log)
}

struct DualContext<'a> {
    problem: &'a TransportProblem,
    calc: Calculus,
    generator: Generator,
}

impl<'a> DualContext<'a> {
    fn new(problem: &'a TransportProblem) -> Result<Self> {
        problem.validate()?;
        Ok(Self { problem, calc: Calculus::new(&problem.jump_set)?, generator: build_generator(&problem.jump_set)? })
    }

    fn interval(&self, left: &CMatrix, right: &CMatrix) -> IntervalHjb<'a> {
        let dt = self.problem.dt();
        let mid = (left + right) * c(0.5);
        let linear = (right - left) / c(dt) + self.generator.apply(&mid) * c(self.problem.epsilon);
        IntervalHjb { problem: self.problem, linear: crate::linalg::hermitian_part(&linear), field: grad(&self.problem.jump_set, &mid) }
    }

    fn traceless(&self, y: &DVector<f64>) -> CMatrix {
        self.calc.from_coords(y)
    }

    /// Sup of the constraint and its gradient with respect to both node potentials.
    fn interval_with_gradient(
        &self,
        yl: &DVector<f64>,
        yr: &DVector<f64>,
        start: &HermitianMatrix,
    ) -> Result<(HjbViolation, DVector<f64>, DVector<f64>)> {
        let dt = self.problem.dt();
        let eps = self.problem.epsilon;
        let hjb = self.interval(&self.traceless(yl), &self.traceless(yr));
        let v = hjb.maximize(start)?;
        let rho = v.witness.as_matrix();
        let ym = (yl + yr) * 0.5;
        let action = self.problem.connection.prepare(v.witness.hermitian())?;
        let mut common = self.calc.laplacian_matrix(&action) * ym * 0.5;
        if eps != 0.0 {
            common += self.calc.coords(&self.generator.apply_adjoint(rho)) * (0.5 * eps);
        }
        let rc = self.calc.coords(rho) / dt;
        let left = &common - &rc;
        let right = common + rc;
        Ok((v, left, right))
    }
}

/// Reduced dual in traceless coordinates.
struct Reduced<'a> {
    ctx: DualContext<'a>,
    target0: DVector<f64>,
    target1: DVector<f64>,
    m: usize,
}

struct ReducedEval {
    value: f64,
    gradient: DVector<f64>,
    sups: Vec<f64>,
    witnesses: Vec<HermitianMatrix>,
}

impl<'a> Reduced<'a> {
    fn new(problem: &'a TransportProblem) -> Result<Self> {
        let ctx = DualContext::new(problem)?;
        let target0 = ctx.calc.coords(problem.rho0.as_matrix());
        let target1 = ctx.calc.coords(problem.rho1.as_matrix());
        let m = ctx.calc.basis().len();
        Ok(Self { ctx, target0, target1, m })
    }

    fn node(&self, z: &DVector<f64>, i: usize) -> DVector<f64> {
        z.rows(i * self.m, self.m).into_owned()
    }

    /// `D(z) = y_N . rho_1 - y_0 . rho_0 - dt sum_i sup_i`, to be maximized.
    fn eval(&self, z: &DVector<f64>, starts: &[HermitianMatrix]) -> Result<ReducedEval> {
        let grid = self.ctx.problem.grid_n;
        let dt = self.ctx.problem.dt();
        let parts: Vec<(HjbViolation, DVector<f64>, DVector<f64>)> = (0..grid)
            .into_par_iter()
            .map(|i| self.ctx.interval_with_gradient(&self.node(z, i), &self.node(z, i + 1), &starts[i]))
            .collect::<Result<_>>()?;
        let mut gradient = DVector::zeros(z.len());
        let m = self.m;
        for (i, (_, left, right)) in parts.iter().enumerate() {
            let mut gl = gradient.rows_mut(i * m, m);
            gl -= left * dt;
            let mut gr = gradient.rows_mut((i + 1) * m, m);
            gr -= right * dt;
        }
        {
            let mut g0 = gradient.rows_mut(0, m);
            g0 -= &self.target0;
        }
        {
            let mut gn = gradient.rows_mut(grid * m, m);
            gn += &self.target1;
        }
        let sups: Vec<f64> = parts.iter().map(|p| p.0.value).collect();
        let value = self.node(z, grid).dot(&self.target1) - self.node(z, 0).dot(&self.target0)
            - dt * sups.iter().sum::<f64>();
        let witnesses = parts.into_iter().map(|p| p.0.witness.hermitian().clone()).collect();
        Ok(ReducedEval { value, gradient, sups, witnesses })
    }

    /// Dense BFGS ascent on the concave reduced dual.
    fn maximize(
        &self,
        z: &mut DVector<f64>,
        starts: &[HermitianMatrix],
        max_iter: usize,
        tol: f64,
    ) -> Result<(ReducedEval, usize, bool)> {
        let mut eval = self.eval(z, starts)?;
        let dim = z.len();
        // first step moves the potentials by about 1% of their size
        let initial = 1e-2 * z.norm().max(1.0) / eval.gradient.norm().max(1e-300);
        let mut h = DMatrix::<f64>::identity(dim, dim) * initial;
        let mut first = true;
        let mut stalled = 0;
        for iter in 0..max_iter {
            let scale = eval.value.abs().max(1e-12);
            if eval.gradient.norm() <= tol * scale.max(1.0) || stalled >= 3 {
                return Ok((eval, iter, true));
            }
            let mut d = &h * &eval.gradient;
            if d.dot(&eval.gradient) <= 0.0 {
                h = DMatrix::identity(dim, dim) * initial;
                d = &eval.gradient * initial;
            }
            let slope = d.dot(&eval.gradient);
            let mut t = 1.0;
            let mut next = None;
            while t > 1e-12 {
                let zt = &*z + &d * t;
                if let Ok(et) = self.eval(&zt, &eval.witnesses) {
                    if et.value >= eval.value + 1e-4 * t * slope {
                        next = Some((zt, et));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((zn, en)) = next else {
                return Ok((eval, iter, stalled > 0 || slope <= tol * scale));
            };
            let s = &zn - &*z;
            // ascent on D is descent on -D: y = grad(-D)_new - grad(-D)_old
            let y = &eval.gradient - &en.gradient;
            let sy = s.dot(&y);
            if sy > 1e-300 {
                if first {
                    h = DMatrix::identity(dim, dim) * (sy / y.dot(&y));
                    first = false;
                }
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            }
            stalled = if en.value - eval.value <= 1e-13 * scale { stalled + 1 } else { 0 };
            *z = zn;
            eval = en;
        }
        Ok((eval, max_iter, false))
    }
}

/// Supremum of the interval constraint for the pair `(A_i, A_{i+1})`, ascending from the maximally mixed state.
pub fn hjb_violation(problem: &TransportProblem, a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HjbViolation> {
    hjb_violation_from(problem, a, b, &HermitianMatrix::identity(problem.dim()))
}

pub fn hjb_violation_from(
    problem: &TransportProblem,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    start: &HermitianMatrix,
) -> Result<HjbViolation> {
    let ctx = DualContext::new(problem)?;
    ctx.interval(a.as_matrix(), b.as_matrix()).maximize(start)
}

/// Best of the maximally mixed start and `restarts` seeded random starts.
pub fn hjb_violation_restarts(
    problem: &TransportProblem,
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    restarts: usize,
    seed: u64,
) -> Result<HjbViolation> {
    let ctx = DualContext::new(problem)?;
    best_of_restarts(&ctx, a.as_matrix(), b.as_matrix(), None, restarts, seed)
}

fn best_of_restarts(
    ctx: &DualContext<'_>,
    a: &CMatrix,
    b: &CMatrix,
    hint: Option<&HermitianMatrix>,
    restarts: usize,
    seed: u64,
) -> Result<HjbViolation> {
    let n = ctx.problem.dim();
    let hjb = ctx.interval(a, b);
    let mut r = rng(seed);
    let mut starts = vec![HermitianMatrix::identity(n)];
    starts.extend(hint.cloned());
    starts.extend((0..restarts).map(|_| random_density(n, 0.01, &mut r).hermitian().clone()));
    let mut best: Option<HjbViolation> = None;
    for s in &starts {
        let v = hjb.maximize(s)?;
        if best.as_ref().is_none_or(|b| v.value > b.value) {
            best = Some(v);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Certify arbitrary node potentials: every interval is re-checked from
/// several ascent starts, and if any constraint is violated the potentials
/// receive the correction `-worst * t * 1`, which lowers every constraint and
/// the objective by exactly `worst`.
pub fn certify(problem: &TransportProblem, potentials: &[HermitianMatrix], restarts: usize, seed: u64) -> Result<DualSolution> {
    certify_with_hints(problem, potentials, None, restarts, seed, 0, true)
}

fn certify_with_hints(
    problem: &TransportProblem,
    potentials: &[HermitianMatrix],
    hints: Option<&[HermitianMatrix]>,
    restarts: usize,
    seed: u64,
    iterations: usize,
    converged: bool,
) -> Result<DualSolution> {
    let grid = problem.grid_n;
    if potentials.len() != grid + 1 {
        return Err(QotError::Dimension(format!("{} potentials for a grid of {grid} intervals", potentials.len())));
    }
    let ctx = DualContext::new(problem)?;
    let checks: Vec<HjbViolation> = (0..grid)
        .into_par_iter()
        .map(|i| {
            let hint = hints.map(|h| &h[i]);
            best_of_restarts(
                &ctx,
                potentials[i].as_matrix(),
                potentials[i + 1].as_matrix(),
                hint,
                restarts,
                seed.wrapping_add(i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let worst = checks.iter().map(|v| v.value).fold(f64::NEG_INFINITY, f64::max);
    let shift = worst.max(0.0);
    let n = problem.dim();
    let node_potentials: Vec<HermitianMatrix> = potentials
        .iter()
        .enumerate()
        .map(|(i, a)| a.sub(&HermitianMatrix::identity(n).scale(shift * i as f64 * problem.dt())))
        .collect();
    let objective = dual_objective(&node_potentials, &problem.rho0, &problem.rho1)?;
    Ok(DualSolution {
        node_potentials,
        objective,
        worst_violation: worst - shift,
        witness_densities: checks.into_iter().map(|v| v.witness).collect(),
        shift,
        iterations,
        converged,
    })
}

/// Node potentials whose midpoint averages are the primal potentials.
///
/// The averages fix the nodes up to an alternating mode `(-1)^i c`; `c` is
/// chosen to minimize `sum_i |A_{i+1} - A_i|^2`.
pub fn lift_potentials(midpoints: &[HermitianMatrix]) -> Vec<HermitianMatrix> {
    let Some(first) = midpoints.first() else { return Vec::new() };
    let n = first.dim();
    let mut nodes = vec![HermitianMatrix::zeros(n)];
    for phi in midpoints {
        let prev = nodes.last().expect("nonempty");
        nodes.push(phi.scale(2.0).sub(prev));
    }
    let mut acc = HermitianMatrix::zeros(n);
    for (i, w) in nodes.windows(2).enumerate() {
        let d = w[1].sub(&w[0]);
        acc = if i % 2 == 0 { acc.sub(&d) } else { acc.add(&d) };
    }
    let c = acc.scale(-0.5 / midpoints.len() as f64);
    nodes
        .into_iter()
        .enumerate()
        .map(|(i, a)| if i % 2 == 0 { a.add(&c) } else { a.sub(&c) })
        .collect()
}

/// Maximize the discrete dual; optionally warm-started from a primal solution.
pub fn solve_dual(problem: &TransportProblem, warm_start: Option<&PrimalSolution>) -> Result<DualSolution> {
    solve_dual_seeded(problem, warm_start, 0)
}

pub fn solve_dual_seeded(problem: &TransportProblem, warm_start: Option<&PrimalSolution>, seed: u64) -> Result<DualSolution> {
    let reduced = Reduced::new(problem)?;
    let grid = problem.grid_n;
    let m = reduced.m;
    // without a primal solution, start from the potentials of the straight-line path
    // inner ascents start from the primal midpoint densities, the expected maximizers
    let (midpoints, path) = match warm_start {
        Some(primal) if primal.potential_path.len() != grid => {
            return Err(QotError::Dimension("warm start was computed on a different grid".into()));
        }
        Some(primal) => (primal.potential_path.clone(), primal.rho_path.clone()),
        None => {
            let path = init_path(problem);
            (eliminate_velocity(problem, &path)?.potential_path, path)
        }
    };
    let starts: Vec<HermitianMatrix> =
        path.windows(2).map(|w| w[0].hermitian().add(w[1].hermitian()).scale(0.5)).collect();
    let mut z = DVector::zeros((grid + 1) * m);
    for (i, a) in lift_potentials(&midpoints).iter().enumerate() {
        z.rows_mut(i * m, m).copy_from(&reduced.ctx.calc.coords(a.as_matrix()));
    }
    let (eval, iterations, converged) = reduced.maximize(&mut z, &starts, problem.max_iter, problem.tol)?;

    // trace parts that make every constraint tight at the solver's suprema
    let n = problem.dim();
    let mut level = 0.0;
    let mut potentials = Vec::with_capacity(grid + 1);
    for i in 0..=grid {
        let traceless = HermitianMatrix::from_hermitian_part(&reduced.ctx.traceless(&reduced.node(&z, i)));
        potentials.push(traceless.add(&HermitianMatrix::identity(n).scale(level)));
        if i < grid {
            level -= problem.dt() * eval.sups[i];
        }
    }
    certify_with_hints(problem, &potentials, Some(&eval.witnesses), CERTIFY_RESTARTS, seed, iterations, converged)
}

/// `action / 2 - objective`, nonnegative for every feasible pair.
pub fn check_weak_duality(primal: &PrimalSolution, dual: &DualSolution) -> Result<f64> {
    if primal.rho_path.len() != dual.node_potentials.len() {
        return Err(QotError::Dimension(format!(
            "primal grid has {} nodes, dual has {}",
            primal.rho_path.len(),
            dual.node_potentials.len()
        )));
    }
    Ok(0.5 * primal.action - dual.objective)
}

/// `(action / 2 - objective) / max(action / 2, 1e-12)`.
pub fn relative_gap(primal_action: f64, dual_objective: f64) -> f64 {
    (0.5 * primal_action - dual_objective) / (0.5 * primal_action).max(1e-12)
}
