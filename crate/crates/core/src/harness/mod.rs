//! Experiment orchestration: configuration, trials, sweeps and result files.

mod config;
mod results;
mod sweep;
mod trial;

pub use config::{load_config, DatasetSpec, ExperimentConfig, Method, ModelKind, Profile, PAPER_EPSILON_GRID};
pub use results::{read_results, write_results, RESULTS_HEADER};
pub use sweep::{load_family, run_sweep, SweepError};
pub use trial::{run_trial, train_model, TrialRecord};
