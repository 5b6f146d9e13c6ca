//! Detailed-balance Lindblad generators in Alicki form.
//!
//! A [`JumpOperatorSet`] carries the invariant density `sigma`, jump
//! operators `V_j` with Bohr frequencies `omega_j`, and the index involution
//! `j -> j*` with `V_{j*} = V_j^*`. The generator is
//!
//! ```text
//! L(A) = sum_j ( e^{-omega_j/2} V_j^* [A, V_j] - e^{omega_j/2} [A, V_j] V_j^* )
//! ```

use nalgebra::SVD;
use serde_json::Value;

use crate::error::{QotError, Result};
use crate::linalg::{
    c, frobenius, gns_inner_unchecked, matrix_unit, ntrace, trace_product, traceless_hermitian_basis,
    CMatrix, DensityMatrix, EigenBasis, HermitianMatrix, SuperOperator,
};
use crate::sampling::{random_hermitian, rng};

/// Residual threshold for the Alicki conditions.
pub const JUMP_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for the numerical kernel of `L`.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Jump {
    pub op: CMatrix,
    pub omega: f64,
}

impl Jump {
    pub fn new(op: CMatrix, omega: f64) -> Self {
        Self { op, omega }
    }
}

#[derive(Debug, Clone)]
pub struct JumpOperatorSet {
    sigma: DensityMatrix,
    jumps: Vec<Jump>,
    involution: Vec<usize>,
}

impl JumpOperatorSet {
    /// Structural checks only; use [`validate_jump_set`] for the Alicki conditions.
    pub fn new(sigma: DensityMatrix, jumps: Vec<Jump>, involution: Vec<usize>) -> Result<Self> {
        let n = sigma.dim();
        if jumps.is_empty() {
            return Err(QotError::Validation("jump set is empty".into()));
        }
        for (j, jump) in jumps.iter().enumerate() {
            if jump.op.nrows() != n || jump.op.ncols() != n {
                return Err(QotError::Dimension(format!(
                    "jump {j} is {}x{}, sigma is {n}x{n}",
                    jump.op.nrows(),
                    jump.op.ncols()
                )));
            }
            if !jump.omega.is_finite() {
                return Err(QotError::Validation(format!("jump {j} has non-finite frequency")));
            }
        }
        if involution.len() != jumps.len() {
            return Err(QotError::Validation(format!(
                "involution has {} entries for {} jumps",
                involution.len(),
                jumps.len()
            )));
        }
        if let Some(&bad) = involution.iter().find(|&&k| k >= jumps.len()) {
            return Err(QotError::Validation(format!("involution index {bad} out of range")));
        }
        Ok(Self { sigma, jumps, involution })
    }

    /// Pairs every jump with the jump equal to its adjoint.
    pub fn with_inferred_involution(sigma: DensityMatrix, jumps: Vec<Jump>) -> Result<Self> {
        let mut involution = Vec::with_capacity(jumps.len());
        for (j, jump) in jumps.iter().enumerate() {
            let adj = jump.op.adjoint();
            let scale = frobenius(&jump.op).max(1.0);
            let partner = jumps
                .iter()
                .position(|other| frobenius(&(&other.op - &adj)) <= JUMP_TOL * scale)
                .ok_or_else(|| QotError::Validation(format!("jump {j} has no adjoint partner")))?;
            involution.push(partner);
        }
        Self::new(sigma, jumps, involution)
    }

    pub fn sigma(&self) -> &DensityMatrix {
        &self.sigma
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn involution(&self) -> &[usize] {
        &self.involution
    }

    pub fn adjoint_index(&self, j: usize) -> usize {
        self.involution[j]
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.omega).collect()
    }

    /// Copy with `omega_j` replaced; used to build broken fixtures.
    pub fn with_omega(&self, j: usize, omega: f64) -> Self {
        let mut out = self.clone();
        out.jumps[j].omega = omega;
        out
    }

    /// `L(A)` evaluated directly from the jump operators.
    pub fn generator_apply(&self, a: &CMatrix) -> CMatrix {
        let n = self.dim();
        let mut out = CMatrix::zeros(n, n);
        for jump in &self.jumps {
            let v = &jump.op;
            let vd = v.adjoint();
            let comm = a * v - v * a;
            out += (&vd * &comm).scale((-jump.omega / 2.0).exp());
            out -= (&comm * &vd).scale((jump.omega / 2.0).exp());
        }
        out
    }
}

/// Largest residual of each Alicki condition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub orthonormality: f64,
    pub tracelessness: f64,
    pub adjoint_pairing: f64,
    pub modular_scaling: f64,
    pub frequency_antisymmetry: f64,
}

impl ValidationReport {
    pub fn worst(&self) -> f64 {
        [
            self.orthonormality,
            self.tracelessness,
            self.adjoint_pairing,
            self.modular_scaling,
            self.frequency_antisymmetry,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.worst() <= JUMP_TOL
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.orthonormality > JUMP_TOL {
            out.push("orthonormality");
        }
        if self.tracelessness > JUMP_TOL {
            out.push("tracelessness");
        }
        if self.adjoint_pairing > JUMP_TOL {
            out.push("adjoint_pairing");
        }
        if self.modular_scaling > JUMP_TOL {
            out.push("modular_scaling");
        }
        if self.frequency_antisymmetry > JUMP_TOL {
            out.push("frequency_antisymmetry");
        }
        out
    }
}

pub fn validate_jump_set(js: &JumpOperatorSet) -> Result<ValidationReport> {
    let sigma = js.sigma.hermitian();
    if sigma.min_eigenvalue() <= 0.0 {
        return Err(QotError::Precondition("sigma must be invertible".into()));
    }
    for (j, &k) in js.involution.iter().enumerate() {
        if js.involution[k] != j {
            return Err(QotError::Validation(format!("involution is not self-inverse at index {j}")));
        }
    }
    let sigma_inv = crate::linalg::matfunc(sigma, |x| 1.0 / x)?;
    let mut report = ValidationReport {
        orthonormality: 0.0,
        tracelessness: 0.0,
        adjoint_pairing: 0.0,
        modular_scaling: 0.0,
        frequency_antisymmetry: 0.0,
    };
    for (j, a) in js.jumps.iter().enumerate() {
        for (k, b) in js.jumps.iter().enumerate() {
            let expected = if j == k { 1.0 } else { 0.0 };
            let r = (gns_inner_unchecked(&a.op, &b.op) - c(expected)).norm();
            report.orthonormality = report.orthonormality.max(r);
        }
        report.tracelessness = report.tracelessness.max(ntrace(&a.op)?.norm());
        let partner = &js.jumps[js.involution[j]];
        report.adjoint_pairing = report.adjoint_pairing.max(frobenius(&(&partner.op - a.op.adjoint())));
        let conj = sigma.as_matrix() * &a.op * sigma_inv.as_matrix();
        let r = frobenius(&(conj - a.op.scale((-a.omega).exp())));
        report.modular_scaling = report.modular_scaling.max(r);
        report.frequency_antisymmetry = report.frequency_antisymmetry.max((partner.omega + a.omega).abs());
    }
    Ok(report)
}

/// The generator `L` and its GNS adjoint `L†`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub forward: SuperOperator,
    pub adjoint: SuperOperator,
}

impl Generator {
    /// Builds `L` without checking the Alicki conditions.
    pub fn from_jump_set_unchecked(js: &JumpOperatorSet) -> Self {
        let forward = SuperOperator::from_map(js.dim(), |a| js.generator_apply(a));
        let adjoint = forward.adjoint();
        Self { forward, adjoint }
    }

    pub fn dim(&self) -> usize {
        self.forward.dim()
    }

    pub fn apply(&self, a: &CMatrix) -> CMatrix {
        self.forward.apply(a)
    }

    pub fn apply_adjoint(&self, x: &CMatrix) -> CMatrix {
        self.adjoint.apply(x)
    }
}

pub fn build_generator(js: &JumpOperatorSet) -> Result<Generator> {
    let report = validate_jump_set(js)?;
    if !report.passes() {
        return Err(QotError::Validation(format!(
            "jump set fails {:?} (worst residual {:.3e})",
            report.failures(),
            report.worst()
        )));
    }
    Ok(Generator::from_jump_set_unchecked(js))
}

/// `P_t = exp(t L)`.
pub fn semigroup(g: &Generator, t: f64) -> Result<SuperOperator> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(QotError::Domain(format!("semigroup time must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(SuperOperator::identity(g.dim()));
    }
    Ok(g.forward.scale(t).exp())
}

/// Maximal detailed-balance residual over random Hermitian pairs, in the
/// infinitesimal form and integrated at `t = 0.1` and `t = 1`.
pub fn check_dbc(js: &JumpOperatorSet, samples: usize) -> Result<f64> {
    let g = Generator::from_jump_set_unchecked(js);
    let n = js.dim();
    let sigma = js.sigma.as_matrix();
    let flows = [semigroup(&g, 0.1)?, semigroup(&g, 1.0)?];
    let mut r = rng(0x5eed_dbc);
    let mut worst = 0.0f64;
    let pairing = |x: &CMatrix, y: &CMatrix| trace_product(&(x.adjoint() * y), sigma);
    for _ in 0..samples {
        let a = random_hermitian(n, &mut r).into_matrix();
        let b = random_hermitian(n, &mut r).into_matrix();
        let la = g.apply(&a);
        let lb = g.apply(&b);
        worst = worst.max((pairing(&la, &b) - pairing(&a, &lb)).norm());
        for p in &flows {
            let pa = p.apply(&a);
            let pb = p.apply(&b);
            worst = worst.max((pairing(&pa, &b) - pairing(&a, &pb)).norm());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ErgodicityReport {
    pub ergodic: bool,
    pub kernel_dim: usize,
}

pub fn check_ergodic(g: &Generator) -> ErgodicityReport {
    let svd = SVD::new(g.forward.matrix().clone(), false, false);
    let largest = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cutoff = KERNEL_TOL * largest;
    let kernel_dim = svd.singular_values.iter().filter(|&&s| s <= cutoff).count();
    ErgodicityReport { ergodic: kernel_dim == 1, kernel_dim }
}

/// Smallest eigenvalue of the Choi matrix `sum_kl E_kl (x) P_t(E_kl)`.
pub fn check_cp(g: &Generator, t: f64) -> Result<f64> {
    let p = semigroup(g, t)?;
    let n = g.dim();
    let mut choi = CMatrix::zeros(n * n, n * n);
    for k in 0..n {
        for l in 0..n {
            let block = p.apply(&matrix_unit(n, k, l));
            for i in 0..n {
                for j in 0..n {
                    choi[(k * n + i, l * n + j)] = block[(i, j)];
                }
            }
        }
    }
    Ok(EigenBasis::of(&choi).values[0])
}

/// Named model families.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    Depolarizing { n: usize },
    TwoPoint { p: f64 },
    DephasingFreeChain { weights: Vec<f64> },
}

impl Preset {
    /// Parses `name` with a JSON parameter object, e.g. `("two_point", {"p": 0.3})`.
    pub fn parse(name: &str, params: &Value) -> Result<Self> {
        let num = |key: &str| {
            params
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| QotError::Parse(format!("preset {name} needs numeric parameter `{key}`")))
        };
        match name {
            "depolarizing" => {
                let n = num("n")?;
                if n.fract() != 0.0 || n < 2.0 {
                    return Err(QotError::Domain(format!("depolarizing needs integer n >= 2, got {n}")));
                }
                Ok(Self::Depolarizing { n: n as usize })
            }
            "two_point" => Ok(Self::TwoPoint { p: num("p")? }),
            "dephasing_free_chain" => {
                let weights = params
                    .get("weights")
                    .and_then(Value::as_array)
                    .ok_or_else(|| QotError::Parse("dephasing_free_chain needs a `weights` array".into()))?
                    .iter()
                    .map(|w| w.as_f64().ok_or_else(|| QotError::Parse("weights must be numbers".into())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::DephasingFreeChain { weights })
            }
            other => Err(QotError::Domain(format!("unknown preset `{other}`"))),
        }
    }

    pub fn build(&self) -> Result<JumpOperatorSet> {
        match self {
            Self::Depolarizing { n } => depolarizing(*n),
            Self::TwoPoint { p } => two_point(*p),
            Self::DephasingFreeChain { weights } => dephasing_free_chain(weights),
        }
    }
}

pub fn preset(name: &str, params: &Value) -> Result<JumpOperatorSet> {
    Preset::parse(name, params)?.build()
}

/// `sigma = 1`, jumps the GNS-orthonormal traceless Hermitian basis, all `omega = 0`.
pub fn depolarizing(n: usize) -> Result<JumpOperatorSet> {
    if n < 2 {
        return Err(QotError::Domain(format!("depolarizing needs n >= 2, got {n}")));
    }
    let jumps: Vec<Jump> = traceless_hermitian_basis(n).into_iter().map(|v| Jump::new(v, 0.0)).collect();
    let involution = (0..jumps.len()).collect();
    JumpOperatorSet::new(DensityMatrix::maximally_mixed(n), jumps, involution)
}

/// Two-level model with `sigma = diag(2p, 2(1-p))` and jumps `sqrt(2) E_12`, `sqrt(2) E_21`.
pub fn two_point(p: f64) -> Result<JumpOperatorSet> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QotError::Domain(format!("two_point needs p in (0, 1), got {p}")));
    }
    dephasing_free_chain(&[p, 1.0 - p])
}

/// Reversible nearest-neighbour chain on `k` levels embedded diagonally.
///
/// `weights` is the stationary distribution (normalized internally), so
/// `sigma = k * diag(pi)`. Each edge `(i, i+1)` contributes the pair
/// `sqrt(k) E_{i,i+1}` and `sqrt(k) E_{i+1,i}` with frequencies
/// `+-log(pi_{i+1} / pi_i)`. Orthonormality of the jumps fixes their scale,
/// so transition rates follow from `pi` alone.
pub fn dephasing_free_chain(weights: &[f64]) -> Result<JumpOperatorSet> {
    let k = weights.len();
    if k < 2 {
        return Err(QotError::Domain("chain needs at least two levels".into()));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(QotError::Domain("chain weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    let pi: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let sigma = DensityMatrix::diagonal(&pi.iter().map(|p| p * k as f64).collect::<Vec<_>>())?;
    let scale = (k as f64).sqrt();
    let mut jumps = Vec::new();
    let mut involution = Vec::new();
    for i in 0..k - 1 {
        let omega = (pi[i + 1] / pi[i]).ln();
        let base = jumps.len();
        jumps.push(Jump::new(matrix_unit(k, i, i + 1).scale(scale), omega));
        jumps.push(Jump::new(matrix_unit(k, i + 1, i).scale(scale), -omega));
        involution.push(base + 1);
        involution.push(base);
    }
    JumpOperatorSet::new(sigma, jumps, involution)
}

/// Checks `tau(X) = tau(Y)`-type conservation: `|tau(L† X)|` for a matrix `X`.
pub fn adjoint_trace_defect(g: &Generator, x: &CMatrix) -> f64 {
    ntrace(&g.apply_adjoint(x)).map(|z| z.norm()).unwrap_or(f64::INFINITY)
}

/// Convenience: the invariant density as a Hermitian matrix.
pub fn sigma_of(js: &JumpOperatorSet) -> &HermitianMatrix {
    js.sigma().hermitian()
}
