//! Robust LQR design for heavy-vehicle path following, tuned by NSGA-II with a
//! multiobjective local search, plus Pareto-front quality indicators.
//!
//! The numeric modules ([`numkernel`], [`vehicle`], [`rlqr`], [`metrics`]) are
//! generic over [`Real`]; the optimisation layer works in `f64`. The aliases
//! below fix the common `f64` instantiations.

pub mod metrics;
pub mod moea;
pub mod molsp;
pub mod mop;
pub mod numkernel;
pub mod rlqr;
pub mod scalar;
pub mod vehicle;

pub use scalar::Real;

pub type Matrix = numkernel::Matrix<f64>;
pub type Matrix32 = numkernel::Matrix<f32>;
pub type StateSpaceModel = vehicle::StateSpaceModel<f64>;
pub type VehicleParams = vehicle::VehicleParams<f64>;
pub type UncertaintySpec = rlqr::UncertaintySpec<f64>;
pub type GainResult = rlqr::GainResult<f64>;
pub type Trajectory = rlqr::Trajectory<f64>;
