//! Confusion matrices and the classification metrics computed from them.

mod confusion;
mod report;
mod scores;

pub use confusion::{build_consensus_matrix, build_vote_matrix, merge_matrix, ConfusionMatrix};
pub use report::{
    full_report, FullReport, IndependenceRow, MatrixStack, MetricsReport, ReferenceCheck,
    ReportRow, INDIVIDUAL_REFERENCE, REFERENCE_TOLERANCE,
};
pub use scores::{
    balanced_accuracy, balanced_accuracy_with, cba, cba_with, f_measure, f_measure_with, mcc,
    mcc_with, overall_accuracy, per_class_accuracy, sds_score, sds_with, Averaging, NaPolicy,
};

use crate::annotation::ItemId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no ground truth for item {0}")]
    UnknownItem(ItemId),
    #[error("item {0} has more than one consensus result")]
    DuplicateItem(ItemId),
    #[error("shape: {0}")]
    Shape(String),
}
