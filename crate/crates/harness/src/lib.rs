//! Experiment orchestration for robust LQR tuning: optimisation runs with
//! and without local search, indicator reports, design selection and the
//! payload-sweep controller comparison.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod report;
pub mod winner;

pub use config::ExperimentConfig;
