//! Experiment harness: builds the example families, runs randomized
//! splitting trials against the truncated-SVD baseline and writes reports.

pub mod baseline;
pub mod config;
pub mod output;
pub mod runner;
pub mod setup;

pub use config::{BaselineMode, Experiment, ExperimentConfig};
pub use runner::{run_experiment, run_sweep, run_with_setup, Aggregates, ExperimentReport, RunOutput, TrialRecord};
pub use setup::{build_setup, Setup};
