//! Simulated workers for checking the independent-worker estimate and for
//! reproducing correlated errors.

mod experiment;
mod model;

pub use experiment::{
    calibrate_correlation, consensus_accuracy, run_experiment, vote_accuracy, Calibration,
    CalibrationSettings, Estimate, ExperimentConfig,
};
pub use model::{
    id_key, simulate_vote, DifficultyModel, WorkerModel, REFERENCE_VOTE_COUNTS,
};

use crate::annotation::CellClass;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("{have} workers cannot give {need} distinct votes per item")]
    InsufficientWorkers { have: usize, need: usize },
    #[error("target {target} for {class} lies outside [{lowest}, {highest}]")]
    TargetUnreachable {
        class: CellClass,
        target: f64,
        lowest: f64,
        highest: f64,
    },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
