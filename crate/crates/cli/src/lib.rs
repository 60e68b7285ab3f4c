//! Experiment runner, exports, and the HTTP session service.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod server;

pub use config::{ArraySource, ExperimentConfig, SweepSpec};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, run_sweep, SessionRecord, SweepTable};
