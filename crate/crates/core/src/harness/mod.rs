//! Experiment orchestration: declarative configs, paired Monte Carlo trials
//! and CSV persistence.

pub mod config;
pub mod experiment;
pub mod figures;
pub mod results;

pub use config::{ExperimentConfig, Scheme, SweepAxis};
pub use experiment::{evaluate_trial, run_experiment, SchemeBeamformer, SchemeOutcome, SchemeRun};
pub use results::{ResultRow, RunResult};
