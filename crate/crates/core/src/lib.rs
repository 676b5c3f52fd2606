//! Quality-controlled crowd annotation of red blood cell images.
//!
//! The crate covers the offline half of the pipeline:
//!
//! - [`annotation`]: the label alphabet, votes, ballots, quorum consensus and
//!   the binomial estimate of consensus accuracy under independent workers.
//! - [`records`]: the line-delimited vote and consensus record formats.
//! - [`dataset`]: ground-truth manifests.
//! - [`metrics`]: confusion matrices and the classification metrics computed
//!   from them, in three-class and merged two-class form.
//! - [`segmentation`]: Chan-Vese level-set segmentation, small object removal
//!   and per-cell crop extraction.
//! - [`simulation`]: stochastic workers with optional item-correlated errors.
//! - [`benchmark`]: a fixed labelled vote corpus for regression checks.
//!
//! The task orchestration service lives in `crowdcell-orchestrator`.

pub mod annotation;
pub mod benchmark;
pub mod dataset;
pub mod metrics;
pub mod records;
pub mod segmentation;
pub mod simulation;

pub use annotation::{
    aggregate, classify_pattern, estimate_consensus_accuracy, AgreementPattern, AnnotationError,
    Ballot, CellClass, ConsensusResult, ConsensusRule, ItemId, MergedClass, MergedOutcome,
    Outcome, Vote, WorkerId,
};
pub use dataset::{Dataset, GroundTruthRecord};
pub use metrics::{ConfusionMatrix, MetricsReport, NaPolicy};
