//! Multiobjective problems: the box-bounded abstraction used by the
//! optimisers and the two RLQR tuning problems.
//!
//! A decision vector encodes the uncertainty matrices and `(log₁₀ μ)²`. Its
//! objectives are per-state cumulative squared regulation errors of the
//! closed loop, averaged over a fixed set of contraction values applied to
//! the problem's reference uncertainty.

use rand::Rng;
use thiserror::Error;

use crate::numkernel::Matrix;
use crate::rlqr::{
    check_rank_condition, rlqr_gain_horizon, rlqr_gain_steady, simulate_closed_loop, GainResult, RlqrError,
    UncertaintySpec, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::vehicle::{applied_model, StateSpaceModel, VehicleError, VehicleParams};

/// Objective value assigned to failed designs.
pub const PENALTY: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MopError {
    #[error("decision variable {index} = {value} outside [{lower}, {upper}]")]
    OutOfBounds { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("expected {expected} decision variables, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Vehicle(#[from] VehicleError),
    #[error(transparent)]
    Rlqr(#[from] RlqrError),
}

/// Per-variable box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MopError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(MopError::Invalid("bounds need equal nonzero lengths".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(MopError::Invalid("each lower bound must be below its upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self, MopError> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// Search span `U − L` of variable `w`.
    pub fn span(&self, w: usize) -> f64 {
        self.upper[w] - self.lower[w]
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.len()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| v >= l && v <= u)
    }

    pub fn check(&self, z: &[f64]) -> Result<(), MopError> {
        if z.len() != self.len() {
            return Err(MopError::WrongLength { expected: self.len(), got: z.len() });
        }
        for (index, (&value, (&lower, &upper))) in z.iter().zip(self.lower.iter().zip(&self.upper)).enumerate() {
            if !(value >= lower && value <= upper) {
                return Err(MopError::OutOfBounds { index, value, lower, upper });
            }
        }
        Ok(())
    }

    pub fn clip(&self, z: &mut [f64]) {
        for (v, (l, u)) in z.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| rng.gen_range(l..=u))
            .collect()
    }
}

/// A box-constrained minimisation problem.
pub trait Problem: Sync {
    fn n_vars(&self) -> usize;
    fn n_objectives(&self) -> usize;
    fn bounds(&self) -> &Bounds;
    /// Objective vector of `z`; never fails (failures map to a penalty).
    fn evaluate(&self, z: &[f64]) -> Vec<f64>;
}

/// Decision vector with its evaluation state.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub z: Vec<f64>,
    pub objectives: Option<Vec<f64>>,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
}

impl Individual {
    pub fn new(z: Vec<f64>) -> Self {
        Self { z, objectives: None, rank: None, crowding: None }
    }

    pub fn evaluated(z: Vec<f64>, objectives: Vec<f64>) -> Self {
        Self { z, objectives: Some(objectives), rank: None, crowding: None }
    }

    /// Objectives of an evaluated individual; panics otherwise.
    pub fn obj(&self) -> &[f64] {
        self.objectives.as_deref().expect("individual not evaluated")
    }
}

/// Pareto dominance for minimisation: no worse everywhere, better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Uniform contraction sample in `[−1, 1]`.
pub fn sample_delta(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.0..=1.0)
}

/// `μ = 10^√v` for the encoded value `v = (log₁₀ μ)²`.
pub fn decode_mu(v: f64) -> f64 {
    10f64.powf(v.max(0.0).sqrt())
}

/// Inverse of [`decode_mu`] on `μ ≥ 1`.
pub fn encode_mu(mu: f64) -> f64 {
    let l = mu.log10();
    l * l
}

fn layout(z: &[f64], n: usize, m: usize) -> UncertaintySpec {
    UncertaintySpec {
        h: Matrix::filled(n, 1, 1.0),
        e_f: Matrix::row(&z[0..n]),
        e_g: Matrix::row(&z[n..n + m]),
        mu: decode_mu(z[n + m]),
    }
}

/// Generic problem layout: `E_F = z₁..₃`, `E_G = z₄`, `μ = 10^√z₅`.
pub fn decode_generic(z: &[f64]) -> Result<UncertaintySpec, MopError> {
    generic_bounds().check(z)?;
    Ok(layout(z, 3, 1))
}

/// Applied problem layout: `E_F = z₁..₄`, `E_G = z₅..₆`, `μ = 10^√z₇`.
pub fn decode_applied(z: &[f64]) -> Result<UncertaintySpec, MopError> {
    applied_bounds().check(z)?;
    Ok(layout(z, 4, 2))
}

/// Flattens a single-row spec back into a decision vector.
pub fn encode_spec(unc: &UncertaintySpec) -> Vec<f64> {
    let mut z = unc.e_f.row_slice(0).to_vec();
    z.extend_from_slice(unc.e_g.row_slice(0));
    z.push(encode_mu(unc.mu));
    z
}

pub fn generic_bounds() -> Bounds {
    Bounds::uniform(5, 0.0, 200.0).expect("static bounds")
}

pub fn applied_bounds() -> Bounds {
    Bounds::uniform(7, 1e-9, 500.0).expect("static bounds")
}

/// Which RLQR variant turns a spec into a gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainMode {
    Steady { tol: f64, max_iter: usize },
    /// First-stage gain of a finite-horizon backward pass.
    Horizon(usize),
}

impl Default for GainMode {
    fn default() -> Self {
        GainMode::Steady { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Generic,
    Applied,
}

/// RLQR tuning problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub kind: ProblemKind,
    pub bounds: Bounds,
    pub nominal_model: StateSpaceModel,
    pub h: Matrix,
    pub q: Matrix,
    pub r: Matrix,
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub delta_samples: Vec<f64>,
    /// Structure of the plant perturbation `F + HΔE_F`, `G + HΔE_G`.
    pub true_uncertainty: UncertaintySpec,
    /// Objective `k` is the cumulative error of state `objective_map[k]`.
    pub objective_map: Vec<usize>,
    pub gain_mode: GainMode,
}

/// Generic-problem matrices `(F, G)`.
pub fn generic_model() -> StateSpaceModel {
    let f = Matrix::from_rows(&[vec![0.9, 0.8, 0.7], vec![0.01, 0.1, 0.3], vec![0.0, 0.25, 0.1]])
        .expect("static matrix");
    let g = Matrix::column(&[0.6, 0.1, 0.25]);
    StateSpaceModel::new(f, g, 1.0).expect("static model")
}

/// The generic problem's nominal uncertainty with the given penalty.
pub fn generic_nominal_uncertainty(mu: f64) -> UncertaintySpec {
    UncertaintySpec {
        h: Matrix::filled(3, 1, 1.0),
        e_f: Matrix::row(&[0.1, 0.2, 0.2]),
        e_g: Matrix::row(&[0.1]),
        mu,
    }
}

pub const GENERIC_Z_STAR: [f64; 5] = [19.933888, 19.999998, 20.000000, 16.339275, 20.000000];
pub const APPLIED_Z_STAR: [f64; 7] = [4.45032, 57.84300, 21.90069, 455.67736, 48.05012, 44.98551, 280.28421];
/// `(log₁₀ μ)²` of the algebraic applied design.
pub const ALGEBRAIC_LOG_MU_SQ: f64 = 81.0;
pub const APPLIED_REFERENCE_E_F: [f64; 4] = [6.85718e-4, -8.62010e-4, 0.0, -6.6666e-3];
pub const APPLIED_REFERENCE_E_G: [f64; 2] = [-6.66666e-3, -6.66666e-3];

/// Reference algebraic uncertainty of the applied problem.
pub fn applied_reference_uncertainty(mu: f64) -> UncertaintySpec {
    UncertaintySpec {
        h: Matrix::filled(4, 1, 1.0),
        e_f: Matrix::row(&APPLIED_REFERENCE_E_F),
        e_g: Matrix::row(&APPLIED_REFERENCE_E_G),
        mu,
    }
}

impl ControlProblem {
    pub fn generic() -> Self {
        Self {
            kind: ProblemKind::Generic,
            bounds: generic_bounds(),
            nominal_model: generic_model(),
            h: Matrix::filled(3, 1, 1.0),
            q: Matrix::identity(3),
            r: Matrix::identity(1),
            x0: vec![1.0, 1.0, 1.0],
            horizon: 300,
            delta_samples: vec![-1.0, 0.0, 1.0],
            true_uncertainty: generic_nominal_uncertainty(decode_mu(ALGEBRAIC_LOG_MU_SQ)),
            objective_map: vec![0, 1, 2],
            gain_mode: GainMode::default(),
        }
    }

    pub fn applied(params: &VehicleParams, dt: f64) -> Result<Self, MopError> {
        let model = applied_model(params, dt)?;
        Ok(Self {
            kind: ProblemKind::Applied,
            bounds: applied_bounds(),
            nominal_model: model,
            h: Matrix::filled(4, 1, 1.0),
            q: Matrix::identity(4),
            r: Matrix::identity(2),
            x0: vec![0.0, 0.0, 1.0, 0.0],
            horizon: 600,
            delta_samples: vec![-1.0, 0.0, 1.0],
            true_uncertainty: applied_reference_uncertainty(decode_mu(ALGEBRAIC_LOG_MU_SQ)),
            objective_map: vec![2, 1, 0, 3],
            gain_mode: GainMode::default(),
        })
    }

    pub fn validate(&self) -> Result<(), MopError> {
        let n = self.nominal_model.n_states();
        let m = self.nominal_model.n_inputs();
        if self.bounds.is_empty() {
            return Err(MopError::Invalid("no decision variables".into()));
        }
        if self.delta_samples.is_empty() || self.delta_samples.iter().any(|d| !(d.abs() <= 1.0)) {
            return Err(MopError::Invalid("delta samples must be nonempty and within [-1, 1]".into()));
        }
        if self.x0.len() != n || self.h.rows() != n || self.q.shape() != (n, n) || self.r.shape() != (m, m) {
            return Err(MopError::Invalid("x0, H, Q or R has the wrong size".into()));
        }
        if self.objective_map.iter().any(|&i| i >= n) || self.objective_map.is_empty() {
            return Err(MopError::Invalid("objective map refers to a missing state".into()));
        }
        self.true_uncertainty.check_dims(n, m)?;
        Ok(())
    }

    /// Decodes `z` into an uncertainty spec using this problem's bounds and `H`.
    pub fn decode(&self, z: &[f64]) -> Result<UncertaintySpec, MopError> {
        self.bounds.check(z)?;
        let n = self.nominal_model.n_states();
        let m = self.nominal_model.n_inputs();
        if z.len() != n + m + 1 {
            return Err(MopError::WrongLength { expected: n + m + 1, got: z.len() });
        }
        let mut unc = layout(z, n, m);
        unc.h = self.h.clone();
        Ok(unc)
    }

    /// RLQR gain of a design, computed on the nominal model.
    pub fn gain(&self, unc: &UncertaintySpec) -> Result<GainResult, MopError> {
        if !check_rank_condition(unc) {
            return Err(MopError::Rlqr(RlqrError::SingularBlock("rank condition violated".into())));
        }
        let res = match self.gain_mode {
            GainMode::Steady { tol, max_iter } => {
                rlqr_gain_steady(&self.nominal_model, unc, &self.q, &self.r, tol, max_iter)?
            }
            GainMode::Horizon(n) => rlqr_gain_horizon(&self.nominal_model, unc, &self.q, &self.r, n)?,
        };
        if !res.converged {
            return Err(MopError::Rlqr(RlqrError::Kernel(crate::numkernel::KernelError::NoConvergence {
                iterations: res.iterations,
                residual: f64::NAN,
            })));
        }
        Ok(res)
    }

    /// Per-state cumulative squared error of gain `k` on the plant perturbed by `delta`.
    pub fn state_errors(&self, k: &Matrix, delta: f64) -> Result<Vec<f64>, MopError> {
        let plant = self.true_uncertainty.perturb(&self.nominal_model, delta);
        Ok(simulate_closed_loop(&plant, k, &self.x0, self.horizon)?.cumulative_sq)
    }

    /// Objectives of gain `k`, averaged over `deltas`; penalised on divergence.
    pub fn objectives_for_gain(&self, k: &Matrix, deltas: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.objective_map.len()];
        for &d in deltas {
            match self.state_errors(k, d) {
                Ok(err) => {
                    for (a, &s) in acc.iter_mut().zip(&self.objective_map) {
                        *a += err[s];
                    }
                }
                Err(_) => return self.penalty(),
            }
        }
        let scale = 1.0 / deltas.len() as f64;
        let out: Vec<f64> = acc.into_iter().map(|v| v * scale).collect();
        if out.iter().all(|v| v.is_finite()) {
            out.into_iter().map(|v| v.min(PENALTY)).collect()
        } else {
            self.penalty()
        }
    }

    pub fn penalty(&self) -> Vec<f64> {
        vec![PENALTY; self.objective_map.len()]
    }

    /// Objectives of a design given directly as an uncertainty spec.
    pub fn evaluate_spec(&self, unc: &UncertaintySpec) -> Vec<f64> {
        match self.gain(unc) {
            Ok(g) => self.objectives_for_gain(&g.k, &self.delta_samples),
            Err(_) => self.penalty(),
        }
    }
}

impl Problem for ControlProblem {
    fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    fn n_objectives(&self) -> usize {
        self.objective_map.len()
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, z: &[f64]) -> Vec<f64> {
        match self.decode(z) {
            Ok(unc) => self.evaluate_spec(&unc),
            Err(_) => self.penalty(),
        }
    }
}
