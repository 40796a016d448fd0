//! Single-track lateral model of a heavy vehicle, its zero-order-hold
//! discretisation, payload variants and the algebraic uncertainty matrices.
//!
//! State order is `[ẏ, ψ̇, ρ, θ]`: lateral velocity, yaw rate, lateral
//! displacement and orientation error.

use thiserror::Error;

use crate::numkernel::{mat_exp, KernelError, Matrix};
use crate::rlqr::UncertaintySpec;
use crate::scalar::Real;

pub const STATE_LABELS: [&str; 4] = ["lateral_velocity", "yaw_rate", "lateral_displacement", "orientation"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VehicleError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("model must be continuous (dt = 0) to discretise")]
    NotContinuous,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Physical parameters of the single-track model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams<T: Real = f64> {
    /// Front axle to centre of gravity, m.
    pub a: T,
    /// Rear axle to centre of gravity, m.
    pub b: T,
    /// Wheelbase, m.
    pub l: T,
    /// Forward speed, m/s.
    pub v: T,
    /// Total mass, kg.
    pub m: T,
    /// Rated payload, kg.
    pub payload: T,
    /// Yaw inertia, kg·m².
    pub j: T,
    /// Front cornering stiffness, N/rad.
    pub c1: T,
    /// Rear cornering stiffness, N/rad.
    pub c2: T,
}

impl<T: Real> VehicleParams<T> {
    /// Nominal truck used throughout the applied problem.
    pub fn reference_truck() -> Self {
        Self {
            a: T::lit(3.187),
            b: T::lit(1.618),
            l: T::lit(4.805),
            v: T::lit(16.6667),
            m: T::lit(16030.0),
            payload: T::lit(12550.0),
            j: T::lit(2.1572e5),
            c1: T::lit(1.0645e5),
            c2: T::lit(5.4042e5),
        }
    }

    /// Checks that every field is finite and strictly positive.
    pub fn validate(&self) -> Result<(), VehicleError> {
        let fields = [
            ("a", self.a),
            ("b", self.b),
            ("l", self.l),
            ("v", self.v),
            ("m", self.m),
            ("payload", self.payload),
            ("J", self.j),
            ("c1", self.c1),
            ("c2", self.c2),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= T::zero() {
                return Err(VehicleError::InvalidParams(format!("{name} = {value} must be positive")));
            }
        }
        Ok(())
    }
}

/// How yaw inertia follows a mass change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InertiaRule {
    /// `J' = J · m'/m`.
    #[default]
    ScaleWithMass,
    Constant,
}

/// Linear state-space model `x⁺ = F x + G u` (or `ẋ = F x + G u` when `dt == 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel<T: Real = f64> {
    pub f: Matrix<T>,
    pub g: Matrix<T>,
    pub dt: T,
    pub state_labels: Vec<String>,
}

impl<T: Real> StateSpaceModel<T> {
    pub fn new(f: Matrix<T>, g: Matrix<T>, dt: T) -> Result<Self, VehicleError> {
        if !f.is_square() || g.rows() != f.rows() {
            return Err(VehicleError::InvalidParams(format!(
                "F is {:?} and G is {:?}",
                f.shape(),
                g.shape()
            )));
        }
        if !(dt >= T::zero()) {
            return Err(VehicleError::InvalidParams("dt must be non-negative".into()));
        }
        let state_labels = (0..f.rows()).map(|i| format!("x{}", i + 1)).collect();
        Ok(Self { f, g, dt, state_labels })
    }

    pub fn n_states(&self) -> usize {
        self.f.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.g.cols()
    }

    pub fn is_continuous(&self) -> bool {
        self.dt == T::zero()
    }

    /// Keeps only the first `k` input columns.
    pub fn with_inputs(&self, k: usize) -> Self {
        Self {
            g: self.g.submatrix(0, 0, self.g.rows(), k),
            ..self.clone()
        }
    }
}

fn vehicle_labels() -> Vec<String> {
    STATE_LABELS.iter().map(|s| s.to_string()).collect()
}

/// Continuous model with the single steering input.
pub fn build_continuous<T: Real>(p: &VehicleParams<T>) -> Result<StateSpaceModel<T>, VehicleError> {
    p.validate()?;
    let VehicleParams { a, b, v, m, j, c1, c2, .. } = *p;
    let mv = m * v;
    let jv = j * v;
    let mut f = Matrix::zeros(4, 4);
    f[(0, 0)] = (-c1 - c2) / mv;
    f[(0, 1)] = (b * c1 - a * c1 - m * v * v) / mv;
    f[(1, 0)] = (b * c2 - a * c1) / jv;
    f[(1, 1)] = (-a * a * c1 - b * b * c1) / jv;
    f[(2, 0)] = T::one();
    f[(2, 3)] = v;
    f[(3, 1)] = T::one();
    let g = Matrix::column(&[c1 / m, a * c1 / j, T::zero(), T::zero()]);
    Ok(StateSpaceModel {
        f,
        g,
        dt: T::zero(),
        state_labels: vehicle_labels(),
    })
}

/// Continuous model with steering plus a second input for the reference path
/// curvature, which enters the orientation-error kinematics as `θ̇ = ψ̇ − v κ`.
pub fn build_continuous_with_curvature<T: Real>(
    p: &VehicleParams<T>,
) -> Result<StateSpaceModel<T>, VehicleError> {
    let base = build_continuous(p)?;
    let curvature = Matrix::column(&[T::zero(), T::zero(), T::zero(), -p.v]);
    Ok(StateSpaceModel {
        g: base.g.hstack(&curvature),
        ..base
    })
}

/// Exact zero-order-hold discretisation through the augmented exponential.
pub fn discretize_zoh<T: Real>(model: &StateSpaceModel<T>, dt: T) -> Result<StateSpaceModel<T>, VehicleError> {
    if !model.is_continuous() {
        return Err(VehicleError::NotContinuous);
    }
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(VehicleError::InvalidParams("dt must be positive".into()));
    }
    let n = model.n_states();
    let m = model.n_inputs();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &model.f.scale(dt));
    aug.set_block(0, n, &model.g.scale(dt));
    let e = mat_exp(&aug);
    Ok(StateSpaceModel {
        f: e.submatrix(0, 0, n, n),
        g: e.submatrix(0, n, n, m),
        dt,
        state_labels: model.state_labels.clone(),
    })
}

/// Discrete two-input model used by the applied problem.
pub fn applied_model<T: Real>(p: &VehicleParams<T>, dt: T) -> Result<StateSpaceModel<T>, VehicleError> {
    discretize_zoh(&build_continuous_with_curvature(p)?, dt)
}

/// Parameters with `overload_fraction × payload` added to the mass.
pub fn payload_variant<T: Real>(p: &VehicleParams<T>, overload_fraction: T) -> Result<VehicleParams<T>, VehicleError> {
    payload_variant_with(p, overload_fraction, InertiaRule::ScaleWithMass)
}

pub fn payload_variant_with<T: Real>(
    p: &VehicleParams<T>,
    overload_fraction: T,
    rule: InertiaRule,
) -> Result<VehicleParams<T>, VehicleError> {
    if overload_fraction == T::zero() {
        return Ok(*p);
    }
    if !(overload_fraction >= -T::one()) {
        return Err(VehicleError::InvalidParams(format!(
            "overload fraction {overload_fraction} below -1"
        )));
    }
    let m = p.m + overload_fraction * p.payload;
    if !(m > T::zero()) {
        return Err(VehicleError::InvalidParams(format!("resulting mass {m} is not positive")));
    }
    let j = match rule {
        InertiaRule::ScaleWithMass => p.j * (m / p.m),
        InertiaRule::Constant => p.j,
    };
    Ok(VehicleParams { m, j, ..*p })
}

/// Differences `Γ_F = F(m_min) − F(m_max)` and `Γ_G = G(m_min) − G(m_max)`
/// of the discrete two-input model between the unloaded and fully overloaded
/// vehicle.
pub fn payload_deltas<T: Real>(
    p: &VehicleParams<T>,
    dt: T,
    rule: InertiaRule,
) -> Result<(Matrix<T>, Matrix<T>), VehicleError> {
    payload_deltas_between(p, dt, rule, -T::one(), T::one())
}

/// As [`payload_deltas`] for arbitrary overload fractions `lo` and `hi`.
pub fn payload_deltas_between<T: Real>(
    p: &VehicleParams<T>,
    dt: T,
    rule: InertiaRule,
    lo: T,
    hi: T,
) -> Result<(Matrix<T>, Matrix<T>), VehicleError> {
    let lo = applied_model(&payload_variant_with(p, lo, rule)?, dt)?;
    let hi = applied_model(&payload_variant_with(p, hi, rule)?, dt)?;
    Ok((&lo.f - &hi.f, &lo.g - &hi.g))
}

/// Uncertainty matrices built from the first row of the payload deltas:
/// `E_F = [1, 1, 1, 0.1] ∘ Γ_F[0, :]`, every `E_G` entry `0.1 · g` where `g`
/// is the signed largest-magnitude entry of `Γ_G[0, :]`, and `H = 1`.
pub fn algebraic_uncertainty<T: Real>(
    p: &VehicleParams<T>,
    dt: T,
    mu: T,
) -> Result<UncertaintySpec<T>, VehicleError> {
    algebraic_uncertainty_with(p, dt, mu, InertiaRule::ScaleWithMass)
}

pub fn algebraic_uncertainty_with<T: Real>(
    p: &VehicleParams<T>,
    dt: T,
    mu: T,
    rule: InertiaRule,
) -> Result<UncertaintySpec<T>, VehicleError> {
    let (gf, gg) = payload_deltas(p, dt, rule)?;
    Ok(uncertainty_from_deltas(&gf, &gg, mu))
}

/// Applies the first-row weighting to already computed deltas.
pub fn uncertainty_from_deltas<T: Real>(gamma_f: &Matrix<T>, gamma_g: &Matrix<T>, mu: T) -> UncertaintySpec<T> {
    let n = gamma_f.cols();
    let weights: Vec<T> = (0..n)
        .map(|k| if k + 1 == n { T::lit(0.1) } else { T::one() })
        .collect();
    let e_f: Vec<T> = gamma_f.row_slice(0).iter().zip(&weights).map(|(&g, &w)| w * g).collect();
    let g = gamma_g
        .row_slice(0)
        .iter()
        .copied()
        .fold(T::zero(), |best, v| if v.abs() > best.abs() { v } else { best });
    UncertaintySpec {
        h: Matrix::filled(n, 1, T::one()),
        e_f: Matrix::row(&e_f),
        e_g: Matrix::filled(1, gamma_g.cols(), T::lit(0.1) * g),
        mu,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_truck_structural_entries() {
        let m = build_continuous(&VehicleParams::<f64>::reference_truck()).unwrap();
        assert_eq!(m.f[(2, 3)], 16.6667);
        assert_eq!(m.f[(2, 0)], 1.0);
        assert_eq!(m.f[(3, 1)], 1.0);
        assert!(m.is_continuous());
    }

    #[test]
    fn a11_by_hand() {
        let m = build_continuous(&VehicleParams::<f64>::reference_truck()).unwrap();
        let hand = -(1.0645e5 + 5.4042e5) / (16030.0 * 16.6667);
        assert!((m.f[(0, 0)] - hand).abs() < 1e-12);
        assert!((m.f[(0, 0)] + 2.42122).abs() < 1e-4);
    }

    #[test]
    fn stiffness_free_limit() {
        // Positivity forbids exact zeros; a vanishing stiffness approaches it.
        let p = VehicleParams { c1: 1e-300, c2: 1e-300, ..VehicleParams::<f64>::reference_truck() };
        let m = build_continuous(&p).unwrap();
        assert!((m.f[(0, 1)] + p.v).abs() < 1e-12);
        assert!(m.f[(0, 0)].abs() < 1e-250);
        assert!(m.g.max_abs() < 1e-250);
    }

    #[test]
    fn rejects_nonpositive() {
        let p = VehicleParams { v: 0.0, ..VehicleParams::<f64>::reference_truck() };
        assert!(build_continuous(&p).is_err());
    }

    #[test]
    fn zoh_trivial_cases() {
        let c = StateSpaceModel::new(Matrix::<f64>::zeros(2, 2), Matrix::column(&[1.0, 2.0]), 0.0).unwrap();
        let d = discretize_zoh(&c, 0.1).unwrap();
        assert!(d.f.max_abs_diff(&Matrix::identity(2)) < 1e-15);
        assert!((d.g[(1, 0)] - 0.2).abs() < 1e-15);

        let (a, b, dt) = (-0.7f64, 2.0, 0.3);
        let c = StateSpaceModel::new(Matrix::from_diag(&[a]), Matrix::from_diag(&[b]), 0.0).unwrap();
        let d = discretize_zoh(&c, dt).unwrap();
        assert!((d.f[(0, 0)] - (a * dt).exp()).abs() < 1e-14);
        assert!((d.g[(0, 0)] - b * ((a * dt).exp() - 1.0) / a).abs() < 1e-14);
    }

    #[test]
    fn payload_variants() {
        let p = VehicleParams::<f64>::reference_truck();
        assert_eq!(payload_variant(&p, 0.0).unwrap(), p);
        assert_eq!(payload_variant(&p, 1.0).unwrap().m, 28580.0);
        assert_eq!(payload_variant(&p, 3.0).unwrap().m, 53680.0);
        assert_eq!(payload_variant(&p, -1.0).unwrap().m, 3480.0);
        let q = payload_variant_with(&p, 1.0, InertiaRule::Constant).unwrap();
        assert_eq!(q.j, p.j);
        assert!(payload_variant(&p, -1.5).is_err());
    }

    #[test]
    fn curvature_column_is_mass_independent() {
        let (_, gg) = payload_deltas(&VehicleParams::<f64>::reference_truck(), 0.1, InertiaRule::ScaleWithMass).unwrap();
        assert_eq!(gg.cols(), 2);
        assert!(gg.column_vec(1).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_span_gives_zero_uncertainty() {
        let p = VehicleParams::<f64>::reference_truck();
        let (gf, gg) = payload_deltas_between(&p, 0.1, InertiaRule::ScaleWithMass, 0.5, 0.5).unwrap();
        let unc = uncertainty_from_deltas(&gf, &gg, 1e9);
        assert_eq!(unc.e_f.max_abs(), 0.0);
        assert_eq!(unc.e_g.max_abs(), 0.0);
    }

    #[test]
    fn single_precision_model() {
        let m = applied_model(&VehicleParams::<f32>::reference_truck(), 0.1).unwrap();
        let m64 = applied_model(&VehicleParams::<f64>::reference_truck(), 0.1).unwrap();
        assert!(m.f.cast::<f64>().max_abs_diff(&m64.f) < 1e-4);
    }
}
