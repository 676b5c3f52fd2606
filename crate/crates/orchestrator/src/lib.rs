//! Self-hosted microtask service for crowd labelling of cell crops.
//!
//! All mutations go through [`state::State::handle`], which turns a command
//! into events, and [`state::State::apply`], which folds them into state.
//! The [`service::Orchestrator`] serializes commands through one writer
//! thread and logs every event before applying it.

pub mod config;
pub mod http;
pub mod log;
pub mod model;
pub mod report;
pub mod service;
pub mod state;

pub use config::{OrchestratorConfig, Policy};
pub use model::*;
pub use service::{Clock, Orchestrator};
pub use state::{Command, Event, Reply, State};

use crowdcell_core::annotation::{ItemId, WorkerId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown batch {0}")]
    UnknownBatch(BatchId),
    #[error("unknown assignment {0}")]
    UnknownAssignment(AssignmentId),
    #[error("worker {0} is already registered")]
    WorkerExists(WorkerId),
    #[error("worker {0} is not qualified for these tasks")]
    NotQualified(WorkerId),
    #[error("no task available")]
    NoneAvailable,
    #[error("assignment {0} passed its deadline")]
    DeadlineExceeded(AssignmentId),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("assignment {id} is {state:?}")]
    WrongState { id: AssignmentId, state: AssignmentState },
    #[error("batch has no items")]
    EmptyBatch,
    #[error("item {0} appears twice")]
    DuplicateItem(ItemId),
    #[error("invalid answers: {0}")]
    InvalidAnswers(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("service stopped")]
    Stopped,
}

impl OrchestratorError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        use OrchestratorError::*;
        match self {
            UnknownWorker(_) => "unknown_worker",
            UnknownTask(_) => "unknown_task",
            UnknownBatch(_) => "unknown_batch",
            UnknownAssignment(_) => "unknown_assignment",
            WorkerExists(_) => "worker_exists",
            NotQualified(_) => "not_qualified",
            NoneAvailable => "none_available",
            DeadlineExceeded(_) => "deadline_exceeded",
            InvalidLabel(_) => "invalid_label",
            WrongState { .. } => "wrong_state",
            EmptyBatch => "empty_batch",
            DuplicateItem(_) => "duplicate_item",
            InvalidAnswers(_) => "invalid_answers",
            Config(_) => "config",
            Storage(_) => "storage",
            Stopped => "stopped",
        }
    }
}

impl From<std::io::Error> for OrchestratorError {
    fn from(e: std::io::Error) -> Self {
        OrchestratorError::Storage(e.to_string())
    }
}
