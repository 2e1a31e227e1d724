//! Experiment driver behind the `mfem` binary: configuration files,
//! N-sweeps and file output.

pub mod config;
pub mod emit;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ResultBundle};
