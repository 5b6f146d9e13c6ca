//! Diagonal restriction of the transport problem.
//!
//! When `sigma`, both endpoints and every jump are supported on matrix units,
//! diagonal paths form a classical Markov chain transport problem on the
//! probability simplex: the weighted Laplacian is a graph Laplacian with edge
//! weights `|c_j|^2 m_j(r_k, r_l)` and the drift is the transposed rate matrix.
//! The problem is solved here with its own dense BFGS and finite-difference
//! gradients, sharing no solver code with the matrix-valued primal.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::connections::{FamilyName, MeanKernel};
use crate::error::{QotError, Result};
use crate::primal::TransportProblem;
use crate::sampling::rng;

const ENTRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
    strength: f64,
    omega: f64,
}

#[derive(Debug, Clone, Copy)]
enum Mean {
    Kms,
    Arithmetic,
}

/// Chain data extracted from a diagonal problem.
#[derive(Debug, Clone)]
pub struct ClassicalChain {
    n: usize,
    edges: Vec<Edge>,
    mean: Mean,
    /// `rates[(a, b)]` is the coefficient of `phi_b` in `(L phi)_a`.
    rates: DMatrix<f64>,
    start: DVector<f64>,
    end: DVector<f64>,
    epsilon: f64,
}

fn scalar_mean(mean: Mean, omega: f64, x: f64, y: f64) -> f64 {
    match mean {
        Mean::Arithmetic => 0.5 * (x + y),
        Mean::Kms => {
            let d = omega + (x / y).ln();
            if d.abs() > 1e-4 {
                ((omega / 2.0).exp() * x - (-omega / 2.0).exp() * y) / d
            } else {
                // midpoint rule of the defining integral; the integrand is nearly constant here
                let m = 64;
                (0..m)
                    .map(|i| {
                        let s = (i as f64 + 0.5) / m as f64;
                        (omega * (s - 0.5)).exp() * x.powf(s) * y.powf(1.0 - s)
                    })
                    .sum::<f64>()
                    / m as f64
            }
        }
    }
}

fn diagonal_entries(m: &crate::linalg::CMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    for k in 0..n {
        for l in 0..n {
            if k != l && m[(k, l)].norm() > ENTRY_TOL {
                return Err(QotError::Unsupported("diagonal oracle needs diagonal densities".into()));
            }
        }
    }
    Ok((0..n).map(|k| m[(k, k)].re).collect())
}

impl ClassicalChain {
    pub fn from_problem(problem: &TransportProblem) -> Result<Self> {
        let js = &problem.jump_set;
        let n = js.dim();
        diagonal_entries(js.sigma().as_matrix())?;
        let start = DVector::from_vec(diagonal_entries(problem.rho0.as_matrix())?);
        let end = DVector::from_vec(diagonal_entries(problem.rho1.as_matrix())?);
        let mean = match problem.connection.name() {
            FamilyName::Kms => Mean::Kms,
            FamilyName::Arithmetic => Mean::Arithmetic,
            FamilyName::Custom => {
                if problem.connection.kernels().iter().all(|k| matches!(k, MeanKernel::Arithmetic)) {
                    Mean::Arithmetic
                } else {
                    return Err(QotError::Unsupported("diagonal oracle handles kms and arithmetic only".into()));
                }
            }
        };
        let mut edges = Vec::new();
        for jump in js.jumps() {
            let support: Vec<(usize, usize)> = (0..n)
                .flat_map(|k| (0..n).map(move |l| (k, l)))
                .filter(|&(k, l)| jump.op[(k, l)].norm() > ENTRY_TOL)
                .collect();
            match support.as_slice() {
                [(k, l)] if k != l => edges.push(Edge {
                    from: *k,
                    to: *l,
                    strength: jump.op[(*k, *l)].norm_sqr(),
                    omega: jump.omega,
                }),
                _ => return Err(QotError::Unsupported("diagonal oracle needs matrix-unit jumps".into())),
            }
        }
        // V = c E_kl on diagonal phi: (L phi)_l += e^{-w/2}|c|^2 (phi_k - phi_l), (L phi)_k += e^{w/2}|c|^2 (phi_l - phi_k)
        let mut rates = DMatrix::zeros(n, n);
        for e in &edges {
            let down = (-e.omega / 2.0).exp() * e.strength;
            let up = (e.omega / 2.0).exp() * e.strength;
            rates[(e.to, e.from)] += down;
            rates[(e.to, e.to)] -= down;
            rates[(e.from, e.to)] += up;
            rates[(e.from, e.from)] -= up;
        }
        Ok(Self { n, edges, mean, rates, start, end, epsilon: problem.epsilon })
    }

    /// Graph Laplacian with `<phi, K phi> = (1/n) sum_j w_j (phi_l - phi_k)^2` in the normalized pairing.
    fn laplacian(&self, r: &DVector<f64>) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            let w = e.strength * scalar_mean(self.mean, e.omega, r[e.from], r[e.to]);
            k[(e.from, e.from)] += w;
            k[(e.to, e.to)] += w;
            k[(e.from, e.to)] -= w;
            k[(e.to, e.from)] -= w;
        }
        k
    }

    /// Cost of one interval, `+inf` outside the open simplex.
    fn interval_cost(&self, left: &DVector<f64>, right: &DVector<f64>, dt: f64) -> f64 {
        if left.iter().chain(right.iter()).any(|&x| x <= 0.0) {
            return f64::INFINITY;
        }
        let mid = (left + right) * 0.5;
        let g = (right - left) / dt - self.rates.transpose() * &mid * self.epsilon;
        let ones = DMatrix::from_element(self.n, self.n, 1.0);
        let Some(phi) = (self.laplacian(&mid) + ones).lu().solve(&g) else {
            return f64::INFINITY;
        };
        dt * phi.dot(&g) / self.n as f64
    }

    fn node(&self, z: &[f64]) -> DVector<f64> {
        let n = self.n;
        let mut r = DVector::zeros(n);
        let mut rest = n as f64;
        for a in 0..n - 1 {
            r[a] = z[a];
            rest -= z[a];
        }
        r[n - 1] = rest;
        r
    }

    fn nodes(&self, z: &DVector<f64>, grid: usize) -> Vec<DVector<f64>> {
        let m = self.n - 1;
        let mut out = Vec::with_capacity(grid + 1);
        out.push(self.start.clone());
        for i in 1..grid {
            out.push(self.node(&z.as_slice()[(i - 1) * m..i * m]));
        }
        out.push(self.end.clone());
        out
    }

    fn objective(&self, z: &DVector<f64>, grid: usize) -> f64 {
        let nodes = self.nodes(z, grid);
        let dt = 1.0 / grid as f64;
        nodes.windows(2).map(|w| self.interval_cost(&w[0], &w[1], dt)).sum()
    }

    /// Central differences touching only the two intervals next to each node.
    fn gradient(&self, z: &DVector<f64>, grid: usize) -> DVector<f64> {
        let m = self.n - 1;
        let dt = 1.0 / grid as f64;
        let nodes = self.nodes(z, grid);
        let h = 1e-7;
        DVector::from_fn(z.len(), |idx, _| {
            let i = idx / m + 1;
            let local = |zz: f64| {
                let mut zi: Vec<f64> = z.as_slice()[(i - 1) * m..i * m].to_vec();
                zi[idx % m] = zz;
                let node = self.node(&zi);
                self.interval_cost(&nodes[i - 1], &node, dt) + self.interval_cost(&node, &nodes[i + 1], dt)
            };
            (local(z[idx] + h) - local(z[idx] - h)) / (2.0 * h)
        })
    }

    fn initial(&self, grid: usize, jitter: f64, seed: u64) -> DVector<f64> {
        let m = self.n - 1;
        let mut r = rng(seed);
        let mut z = DVector::zeros((grid - 1) * m);
        for i in 1..grid {
            let t = i as f64 / grid as f64;
            let node = &self.start * (1.0 - t) + &self.end * t;
            let min = node.min();
            for a in 0..m {
                let shift = if jitter > 0.0 { jitter * min * r.random_range(-1.0..1.0) } else { 0.0 };
                z[(i - 1) * m + a] = node[a] + shift;
            }
        }
        z
    }

    /// Dense BFGS with Armijo backtracking.
    pub fn solve(&self, grid: usize, jitter: f64, seed: u64) -> Result<f64> {
        if grid < 2 {
            return Err(QotError::Domain("oracle grid needs at least 2 intervals".into()));
        }
        if self.start == self.end && self.epsilon == 0.0 {
            return Ok(0.0);
        }
        let mut z = self.initial(grid, jitter, seed);
        let mut f = self.objective(&z, grid);
        if !f.is_finite() {
            return Err(QotError::Domain("oracle start leaves the simplex".into()));
        }
        let dim = z.len();
        let mut h = DMatrix::<f64>::identity(dim, dim) * 1e-2;
        let mut g = self.gradient(&z, grid);
        let mut first = true;
        let mut stalled = 0;
        for _ in 0..5000 {
            if g.norm() < 1e-9 || stalled >= 3 {
                break;
            }
            let mut d = -(&h * &g);
            if d.dot(&g) >= 0.0 {
                h = DMatrix::identity(dim, dim) * 1e-2;
                d = -(&h * &g);
            }
            let mut t = 1.0;
            let mut next = None;
            while t > 1e-14 {
                let zt = &z + &d * t;
                let ft = self.objective(&zt, grid);
                if ft <= f + 1e-4 * t * g.dot(&d) {
                    next = Some((zt, ft));
                    break;
                }
                t *= 0.5;
            }
            let Some((zn, fn_)) = next else { break };
            let gn = self.gradient(&zn, grid);
            let s = &zn - &z;
            let y = &gn - &g;
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
            stalled = if f - fn_ <= 1e-15 * f.abs() { stalled + 1 } else { 0 };
            z = zn;
            f = fn_;
            g = gn;
        }
        Ok(f)
    }
}

/// Brute-force value on diagonal data at four times the problem grid.
pub fn diagonal_oracle(problem: &TransportProblem) -> Result<f64> {
    ClassicalChain::from_problem(problem)?.solve(4 * problem.grid_n, 0.0, 0)
}
