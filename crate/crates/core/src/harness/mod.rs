//! Experiment driver: trial grids over algorithms, difficulty, K and alpha,
//! CSV output and SVG figures.

mod config;
mod plot;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Algorithm, BackendKind, ExperimentConfig, StartGoalMode};
pub use plot::{emit_plot, PlotKind};
pub use run::{
    build_backend, read_rows, run_experiment, run_trial, run_with_backend, summarize, trial_endpoints, write_results,
    CellSpec, CellSummary, ExperimentResult, TrialRow, SCHEMA_VERSION, SUMMARY_CSV, TRIALS_CSV,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("start/goal sampling failed: {0}")]
    Sampling(String),
    #[error("{0}: csv error: {1}")]
    Csv(PathBuf, String),
    #[error("plot: {0}")]
    Plot(String),
}
