//! Label alphabet, votes, ballots and quorum consensus.

mod consensus;
mod reliability;
mod types;

pub use consensus::{
    aggregate, aggregate_corpus, classify_pattern, AgreementPattern, CorpusAggregation,
    ConsensusResult, ConsensusRule, IncompleteBallot, MergedOutcome, Outcome, PatternHistogram,
};
pub use reliability::estimate_consensus_accuracy;
pub use types::{Ballot, CellClass, ItemId, MergedClass, Vote, WorkerId};

/// Redundancy used when nothing else is configured: five votes per item.
pub const DEFAULT_REDUNDANCY: usize = 5;

/// Votes that must coincide for a label to be accepted with five voters.
pub const DEFAULT_QUORUM: u32 = 3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnnotationError {
    #[error("ballot for item {item_id} has {have} of {need} votes")]
    IncompleteBallot {
        item_id: ItemId,
        have: usize,
        need: usize,
    },
    #[error("vote for item {got} cannot join the ballot of item {expected}")]
    WrongItem { expected: ItemId, got: ItemId },
    #[error("worker {worker_id} already voted on item {item_id}")]
    DuplicateWorker { item_id: ItemId, worker_id: WorkerId },
    #[error("ballot for item {0} already holds all of its votes")]
    BallotFull(ItemId),
    #[error("unknown label {0:?}; expected circular, elongated or other")]
    UnknownLabel(String),
    #[error("invalid consensus rule: {0}")]
    InvalidRule(String),
    #[error("domain error: {0}")]
    Domain(String),
}
