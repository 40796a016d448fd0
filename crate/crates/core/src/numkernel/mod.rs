//! Dense real-matrix kernel: linear solves, matrix exponential, discrete
//! Riccati iteration and eigenvalue utilities.

mod eigen;
mod expm;
mod lu;
mod matrix;
mod riccati;

pub use eigen::{numerical_rank, singular_values, spectral_radius, symmetric_eigenvalues};
pub use expm::mat_exp;
pub use lu::{solve_linear, Lu};
pub use matrix::Matrix;
pub use riccati::{dare_gain, DareSolution};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}
