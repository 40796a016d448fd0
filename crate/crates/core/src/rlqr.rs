//! Robust linear quadratic regulator for systems with structured parametric
//! uncertainty `[δF δG] = H Δ [E_F E_G]`, `‖Δ‖ ≤ 1`.
//!
//! One backward step solves a single block linear system. For finite `μ` the
//! penalised form with `Σ(μ, λ̂)` is used; from [`MU_LIMIT`] upwards the exact
//! `μ → ∞` form, where `E_F + E_G K = 0` holds as a hard constraint.

use thiserror::Error;

use crate::numkernel::{
    dare_gain, numerical_rank, symmetric_eigenvalues, KernelError, Lu, Matrix,
};
use crate::scalar::Real;
use crate::vehicle::StateSpaceModel;

/// Penalties at or above this value use the limit form.
pub const MU_LIMIT: f64 = 1e10;
/// States whose magnitude exceeds this are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e12;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 5000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weighting or uncertainty: {0}")]
    Invalid(String),
    #[error("singular block system: {0}")]
    SingularBlock(String),
    #[error("cost matrix not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Structured uncertainty `(H, E_F, E_G)` and the penalty `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec<T: Real = f64> {
    pub h: Matrix<T>,
    pub e_f: Matrix<T>,
    pub e_g: Matrix<T>,
    pub mu: T,
}

impl<T: Real> UncertaintySpec<T> {
    /// Uncertainty-free spec with a single uncertainty channel.
    pub fn zero(n: usize, m: usize, mu: T) -> Self {
        Self {
            h: Matrix::filled(n, 1, T::one()),
            e_f: Matrix::zeros(1, n),
            e_g: Matrix::zeros(1, m),
            mu,
        }
    }

    pub fn check_dims(&self, n: usize, m: usize) -> Result<(), RlqrError> {
        let l = self.e_f.rows();
        if self.h.rows() != n || self.e_f.cols() != n || self.e_g.shape() != (l, m) {
            return Err(RlqrError::Dimension(format!(
                "H {:?}, E_F {:?}, E_G {:?} for n = {n}, m = {m}",
                self.h.shape(),
                self.e_f.shape(),
                self.e_g.shape()
            )));
        }
        if !(self.mu > T::zero()) || self.mu.is_nan() {
            return Err(RlqrError::Invalid(format!("mu = {} must be positive", self.mu)));
        }
        Ok(())
    }

    /// `(H Δ E_F, H Δ E_G)` for a scalar contraction `Δ = δ·I`.
    pub fn deltas(&self, delta: T) -> (Matrix<T>, Matrix<T>) {
        let p = self.h.cols();
        let l = self.e_f.rows();
        let mut d = Matrix::zeros(p, l);
        for i in 0..p.min(l) {
            d[(i, i)] = delta;
        }
        let hd = self.h.matmul(&d);
        (hd.matmul(&self.e_f), hd.matmul(&self.e_g))
    }

    /// The plant `(F + HΔE_F, G + HΔE_G)`.
    pub fn perturb(&self, model: &StateSpaceModel<T>, delta: T) -> StateSpaceModel<T> {
        let (df, dg) = self.deltas(delta);
        StateSpaceModel {
            f: &model.f + &df,
            g: &model.g + &dg,
            ..model.clone()
        }
    }
}

/// Output of one backward step or of the steady-state iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GainResult<T: Real = f64> {
    /// Feedback gain with `u = K x`.
    pub k: Matrix<T>,
    /// Closed-loop matrix.
    pub l: Matrix<T>,
    /// Cost matrix.
    pub p: Matrix<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Simulated closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real = f64> {
    /// `N + 1` states including `x0`.
    pub states: Vec<Vec<T>>,
    /// `N` inputs `u_i = K x_i`.
    pub inputs: Vec<Vec<T>>,
    /// Per-state sum of squares over all stored states.
    pub cumulative_sq: Vec<T>,
}

/// `rank([E_F E_G]) == rank(E_G)`, singular values cut at `1e-10·σ_max`.
pub fn check_rank_condition<T: Real>(unc: &UncertaintySpec<T>) -> bool {
    let tol = T::lit(1e-10);
    let joint = unc.e_f.hstack(&unc.e_g);
    numerical_rank(&joint, tol) == numerical_rank(&unc.e_g, tol)
}

fn check_positive_definite<T: Real>(name: &str, m: &Matrix<T>) -> Result<(), RlqrError> {
    if !m.is_square() {
        return Err(RlqrError::Dimension(format!("{name} must be square")));
    }
    let ev = symmetric_eigenvalues(m)?;
    if m.asymmetry() > T::lit(1e-12) * (T::one() + m.max_abs()) || ev[0] <= T::zero() {
        return Err(RlqrError::Invalid(format!("{name} must be symmetric positive definite")));
    }
    Ok(())
}

fn psd_tolerance<T: Real>(p: &Matrix<T>) -> T {
    T::lit(1e-8) * T::one().max(p.max_abs())
}

/// Row-reduces `[E_G | E_F]` so the constraint `E_G K = −E_F` has full row
/// rank. Rows whose `E_G` part vanishes must have a vanishing `E_F` part.
fn reduce_constraints<T: Real>(e_g: &Matrix<T>, e_f: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>), RlqrError> {
    let l = e_g.rows();
    let m = e_g.cols();
    let n = e_f.cols();
    let mut rows: Vec<Vec<T>> = (0..l)
        .map(|i| {
            let mut r = e_g.row_slice(i).to_vec();
            r.extend_from_slice(e_f.row_slice(i));
            r
        })
        .collect();
    let g_tol = T::lit(1e-10) * e_g.max_abs();
    let f_tol = T::lit(1e-10) * T::one().max(e_f.max_abs()).max(e_g.max_abs());
    let mut kept = Vec::new();
    let mut active: Vec<usize> = (0..l).collect();
    loop {
        let mut best: Option<(usize, usize, T)> = None;
        for (pos, &r) in active.iter().enumerate() {
            for c in 0..m {
                let v = rows[r][c].abs();
                if v > g_tol && best.map_or(true, |(_, _, b)| v > b) {
                    best = Some((pos, c, v));
                }
            }
        }
        let Some((pos, c, _)) = best else { break };
        let pr = active.remove(pos);
        let pivot = rows[pr][c];
        for &r in &active {
            let factor = rows[r][c] / pivot;
            if factor != T::zero() {
                for k in 0..(m + n) {
                    let v = rows[pr][k];
                    rows[r][k] -= factor * v;
                }
            }
        }
        kept.push(pr);
    }
    for &r in &active {
        if rows[r][m..].iter().any(|v| v.abs() > f_tol) {
            return Err(RlqrError::SingularBlock(
                "E_F + E_G K = 0 has no solution (rank condition violated)".into(),
            ));
        }
    }
    let k = kept.len();
    let mut g_red = Matrix::zeros(k, m);
    let mut f_red = Matrix::zeros(k, n);
    for (i, &r) in kept.iter().enumerate() {
        for c in 0..m {
            g_red[(i, c)] = rows[r][c];
        }
        for c in 0..n {
            f_red[(i, c)] = rows[r][m + c];
        }
    }
    Ok((g_red, f_red))
}

/// Reusable block system for repeated backward steps with fixed data.
#[derive(Debug, Clone)]
struct StepSystem<T: Real> {
    n: usize,
    m: usize,
    template: Matrix<T>,
    rhs: Matrix<T>,
    /// Offsets of the `L` and `K` unknown blocks.
    l_off: usize,
    k_off: usize,
}

impl<T: Real> StepSystem<T> {
    fn new(
        model: &StateSpaceModel<T>,
        unc: &UncertaintySpec<T>,
        q: &Matrix<T>,
        r: &Matrix<T>,
    ) -> Result<Self, RlqrError> {
        let n = model.n_states();
        let m = model.n_inputs();
        if model.is_continuous() {
            return Err(RlqrError::Invalid("model must be discrete".into()));
        }
        unc.check_dims(n, m)?;
        if q.shape() != (n, n) || r.shape() != (m, m) {
            return Err(RlqrError::Dimension(format!(
                "Q {:?} and R {:?} for n = {n}, m = {m}",
                q.shape(),
                r.shape()
            )));
        }
        let q_inv = Lu::factor(q)?.inverse()?;
        let r_inv = Lu::factor(r)?.inverse()?;
        let f = &model.f;
        let g = &model.g;
        let eye = Matrix::identity(n);
        let eye_m = Matrix::identity(m);
        if unc.mu.to_f64_lossy() >= MU_LIMIT {
            let (eg, ef) = reduce_constraints(&unc.e_g, &unc.e_f)?;
            let l = eg.rows();
            // Blocks: x1 n, x2 m, x3 n, x4 n, x5 l, L n, K m.
            let offs = [0, n, n + m, 2 * n + m, 3 * n + m, 3 * n + m + l, 4 * n + m + l];
            let size = 4 * n + 2 * m + l;
            let mut a = Matrix::zeros(size, size);
            a.set_block(offs[0], offs[5], &eye);
            a.set_block(offs[1], offs[1], &r_inv);
            a.set_block(offs[1], offs[6], &eye_m);
            a.set_block(offs[2], offs[2], &q_inv);
            a.set_block(offs[3], offs[5], &eye);
            a.set_block(offs[3], offs[6], &-g);
            if l > 0 {
                a.set_block(offs[4], offs[6], &-&eg);
                a.set_block(offs[6], offs[4], &-&eg.transpose());
            }
            a.set_block(offs[5], offs[0], &eye);
            a.set_block(offs[5], offs[3], &eye);
            a.set_block(offs[6], offs[1], &eye_m);
            a.set_block(offs[6], offs[3], &-&g.transpose());
            let mut rhs = Matrix::zeros(size, n);
            rhs.set_block(offs[2], 0, &-&eye);
            rhs.set_block(offs[3], 0, f);
            if l > 0 {
                rhs.set_block(offs[4], 0, &ef);
            }
            Ok(Self { n, m, template: a, rhs, l_off: offs[5], k_off: offs[6] })
        } else {
            let l = unc.e_f.rows();
            let hth = unc.h.transpose().matmul(&unc.h);
            let hth_norm = symmetric_eigenvalues(&hth)?.last().copied().unwrap_or(T::zero());
            if !(hth_norm > T::zero()) {
                return Err(RlqrError::Invalid("H must be nonzero for finite mu".into()));
            }
            let lambda = T::lit(1.01) * unc.mu * hth_norm;
            let lam_inv = T::one() / lambda;
            let mut sigma = Matrix::zeros(n + l, n + l);
            let top = &eye.scale(T::one() / unc.mu) - &unc.h.matmul(&unc.h.transpose()).scale(lam_inv);
            sigma.set_block(0, 0, &top);
            sigma.set_block(n, n, &Matrix::identity(l).scale(lam_inv));
            let mut cal_i = Matrix::zeros(n + l, n);
            cal_i.set_block(0, 0, &eye);
            let cal_g = g.vstack(&unc.e_g);
            let cal_f = f.vstack(&unc.e_f);
            // Blocks: x1 n, x2 m, x3 n, x4 n+l, L n, K m.
            let offs = [0, n, n + m, 2 * n + m, 3 * n + m + l, 4 * n + m + l];
            let size = 4 * n + 2 * m + l;
            let mut a = Matrix::zeros(size, size);
            a.set_block(offs[0], offs[4], &eye);
            a.set_block(offs[1], offs[1], &r_inv);
            a.set_block(offs[1], offs[5], &eye_m);
            a.set_block(offs[2], offs[2], &q_inv);
            a.set_block(offs[3], offs[3], &sigma);
            a.set_block(offs[3], offs[4], &cal_i);
            a.set_block(offs[3], offs[5], &-&cal_g);
            a.set_block(offs[4], offs[0], &eye);
            a.set_block(offs[4], offs[3], &cal_i.transpose());
            a.set_block(offs[5], offs[1], &eye_m);
            a.set_block(offs[5], offs[3], &-&cal_g.transpose());
            let mut rhs = Matrix::zeros(size, n);
            rhs.set_block(offs[2], 0, &-&eye);
            rhs.set_block(offs[3], 0, &cal_f);
            Ok(Self { n, m, template: a, rhs, l_off: offs[4], k_off: offs[5] })
        }
    }

    fn step(&self, p_next: &Matrix<T>) -> Result<GainResult<T>, RlqrError> {
        let n = self.n;
        if p_next.shape() != (n, n) {
            return Err(RlqrError::Dimension("P_next must be n x n".into()));
        }
        let p_inv = Lu::factor(p_next)
            .and_then(|lu| lu.inverse())
            .map_err(|e| RlqrError::SingularBlock(format!("P_next not invertible: {e}")))?;
        let mut a = self.template.clone();
        a.set_block(0, 0, &p_inv);
        let lu = Lu::factor(&a).map_err(|e| RlqrError::SingularBlock(e.to_string()))?;
        let x = lu.solve(&self.rhs)?;
        let l = x.submatrix(self.l_off, 0, n, n);
        let k = x.submatrix(self.k_off, 0, self.m, n);
        let p_raw = self.rhs.transpose().matmul(&x);
        if !p_raw.is_finite() {
            return Err(RlqrError::SingularBlock("non-finite solution".into()));
        }
        let p = p_raw.symmetrized();
        let ev = symmetric_eigenvalues(&p)?;
        if ev[0] < -psd_tolerance(&p) {
            return Err(RlqrError::NotPositive {
                min_eigenvalue: ev[0].to_f64_lossy(),
            });
        }
        Ok(GainResult { k, l, p, iterations: 1, converged: true })
    }
}

/// One backward step of the recursion from `P_next`.
pub fn rlqr_step<T: Real>(
    model: &StateSpaceModel<T>,
    unc: &UncertaintySpec<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    p_next: &Matrix<T>,
) -> Result<GainResult<T>, RlqrError> {
    check_positive_definite("Q", q)?;
    check_positive_definite("R", r)?;
    StepSystem::new(model, unc, q, r)?.step(p_next)
}

/// Iterates the recursion from `P = Q` until the relative update is below
/// `tol` or `max_iter` steps have run; `converged` reports which.
pub fn rlqr_gain_steady<T: Real>(
    model: &StateSpaceModel<T>,
    unc: &UncertaintySpec<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<GainResult<T>, RlqrError> {
    if !(tol > T::zero()) {
        return Err(RlqrError::Invalid("tol must be positive".into()));
    }
    check_positive_definite("Q", q)?;
    check_positive_definite("R", r)?;
    let sys = StepSystem::new(model, unc, q, r)?;
    let mut p = q.symmetrized();
    let mut last = None;
    for it in 1..=max_iter.max(1) {
        let mut res = sys.step(&p)?;
        let change = (&res.p - &p).norm_inf();
        let done = change < tol * (T::one() + p.norm_inf());
        p = res.p.clone();
        res.iterations = it;
        res.converged = done;
        if done {
            return Ok(res);
        }
        last = Some(res);
    }
    Ok(last.expect("at least one iteration"))
}

/// Runs `horizon` backward steps from `P_N = Q` and returns the first-stage gain.
pub fn rlqr_gain_horizon<T: Real>(
    model: &StateSpaceModel<T>,
    unc: &UncertaintySpec<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    horizon: usize,
) -> Result<GainResult<T>, RlqrError> {
    check_positive_definite("Q", q)?;
    check_positive_definite("R", r)?;
    let sys = StepSystem::new(model, unc, q, r)?;
    let mut p = q.symmetrized();
    let mut res = None;
    for it in 1..=horizon.max(1) {
        let mut step = sys.step(&p)?;
        step.iterations = it;
        p = step.p.clone();
        res = Some(step);
    }
    Ok(res.expect("at least one step"))
}

/// Standard LQR gain in the `u = K x` convention.
pub fn lqr_gain<T: Real>(model: &StateSpaceModel<T>, q: &Matrix<T>, r: &Matrix<T>) -> Result<GainResult<T>, RlqrError> {
    lqr_gain_with(model, q, r, T::lit(DEFAULT_TOL), DEFAULT_MAX_ITER)
}

pub fn lqr_gain_with<T: Real>(
    model: &StateSpaceModel<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    tol: T,
    max_iter: usize,
) -> Result<GainResult<T>, RlqrError> {
    let sol = dare_gain(&model.f, &model.g, q, r, tol, max_iter)?;
    let k = -&sol.k;
    let l = &model.f + &model.g.matmul(&k);
    Ok(GainResult { k, l, p: sol.p, iterations: sol.iterations, converged: true })
}

/// Iterates `x⁺ = F x + G K x` for `steps` steps.
pub fn simulate_closed_loop<T: Real>(
    plant: &StateSpaceModel<T>,
    k: &Matrix<T>,
    x0: &[T],
    steps: usize,
) -> Result<Trajectory<T>, RlqrError> {
    simulate_closed_loop_with(plant, k, x0, steps, |_| None)
}

/// As [`simulate_closed_loop`], adding `w(i)` to the state update when given.
pub fn simulate_closed_loop_with<T: Real>(
    plant: &StateSpaceModel<T>,
    k: &Matrix<T>,
    x0: &[T],
    steps: usize,
    w: impl Fn(usize) -> Option<Vec<T>>,
) -> Result<Trajectory<T>, RlqrError> {
    let n = plant.n_states();
    if x0.len() != n || k.shape() != (plant.n_inputs(), n) {
        return Err(RlqrError::Dimension(format!(
            "x0 has {} entries and K is {:?} for a plant with n = {n}, m = {}",
            x0.len(),
            k.shape(),
            plant.n_inputs()
        )));
    }
    let closed = &plant.f + &plant.g.matmul(k);
    let bound = T::lit(DIVERGENCE_BOUND);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut cumulative_sq: Vec<T> = x0.iter().map(|&v| v * v).collect();
    let mut x = x0.to_vec();
    states.push(x.clone());
    for i in 0..steps {
        inputs.push(k.mul_vec(&x));
        let mut next = closed.mul_vec(&x);
        if let Some(wi) = w(i) {
            for (a, b) in next.iter_mut().zip(wi) {
                *a += b;
            }
        }
        if next.iter().any(|v| !(v.abs() <= bound)) {
            return Err(RlqrError::Diverged { step: i + 1 });
        }
        for (c, &v) in cumulative_sq.iter_mut().zip(&next) {
            *c += v * v;
        }
        x = next;
        states.push(x.clone());
    }
    Ok(Trajectory { states, inputs, cumulative_sq })
}
