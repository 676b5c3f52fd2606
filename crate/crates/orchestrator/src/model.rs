use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crowdcell_core::annotation::{CellClass, ItemId, WorkerId};

macro_rules! numeric_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }
    };
}

numeric_id!(BatchId, "b");
numeric_id!(TaskId, "t");
numeric_id!(AssignmentId, "a");

/// Amounts are kept in millionths of a US dollar.
pub type Micros = u64;

pub const MICROS_PER_USD: f64 = 1_000_000.0;

pub fn usd(micros: Micros) -> f64 {
    micros as f64 / MICROS_PER_USD
}

pub fn micros(usd: f64) -> Micros {
    (usd * MICROS_PER_USD).round() as Micros
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub worker_id: WorkerId,
    pub is_master: bool,
    /// Decided assignments before registration, for the approval rate.
    pub prior_approved: u64,
    pub prior_rejected: u64,
    pub approved_count: u64,
    pub rejected_count: u64,
    pub submitted_count: u64,
    pub balance: Micros,
    pub registered_at: DateTime<Utc>,
}

impl WorkerProfile {
    /// Approved over decided (approved plus rejected) assignments, prior
    /// history included; 1.0 before any decision.
    pub fn approval_rate(&self) -> f64 {
        let approved = self.prior_approved + self.approved_count;
        let decided = approved + self.prior_rejected + self.rejected_count;
        if decided == 0 {
            1.0
        } else {
            approved as f64 / decided as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Open,
    Complete,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: TaskId,
    pub batch_id: BatchId,
    /// Two items, or one for the odd leftover of a batch.
    pub items: Vec<ItemId>,
    pub k: usize,
    pub reward: Micros,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
    pub state: TaskState,
    pub assignments: Vec<AssignmentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentState {
    Claimed,
    Submitted,
    Expired,
    Approved,
    Rejected,
}

impl AssignmentState {
    /// Holds one of the task's `k` slots.
    pub fn occupies_slot(self) -> bool {
        !matches!(self, AssignmentState::Expired)
    }

    /// Carries answers.
    pub fn has_answers(self) -> bool {
        matches!(
            self,
            AssignmentState::Submitted | AssignmentState::Approved | AssignmentState::Rejected
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub item_id: ItemId,
    pub label: CellClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub worker_id: WorkerId,
    pub claimed_at: DateTime<Utc>,
    pub deadline: DateTime<Utc>,
    pub state: AssignmentState,
    pub answers: Vec<Answer>,
    pub submitted_at: Option<DateTime<Utc>>,
    pub resolved_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerReason {
    Reward,
    Bonus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub worker_id: WorkerId,
    pub assignment_id: AssignmentId,
    pub amount: Micros,
    pub reason: LedgerReason,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchItem {
    pub item_id: ItemId,
    /// Path of the crop relative to the image directory.
    #[serde(default)]
    pub image: Option<String>,
    /// Known ground truth, used only for reports.
    #[serde(default)]
    pub truth: Option<CellClass>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub batch_id: BatchId,
    pub created_at: DateTime<Utc>,
    pub items: Vec<BatchItem>,
    pub tasks: Vec<TaskId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Items paired in the order given.
    #[default]
    Sequential,
    /// Items shuffled with the seed, then paired.
    Shuffled(u64),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pa: u64, pr: u64) -> WorkerProfile {
        WorkerProfile {
            worker_id: "w".into(),
            is_master: true,
            prior_approved: pa,
            prior_rejected: pr,
            approved_count: 0,
            rejected_count: 0,
            submitted_count: 0,
            balance: 0,
            registered_at: DateTime::from_timestamp(0, 0).unwrap(),
        }
    }

    #[test]
    fn approval_rate_convention() {
        assert_eq!(profile(0, 0).approval_rate(), 1.0);
        assert_eq!(profile(85, 15).approval_rate(), 0.85);
        let mut p = profile(9, 1);
        p.submitted_count = 5;
        // pending submissions do not count against the worker
        assert_eq!(p.approval_rate(), 0.9);
    }

    #[test]
    fn money() {
        assert_eq!(micros(0.01), 10_000);
        assert_eq!(usd(10_000), 0.01);
        assert_eq!(TaskId(7).to_string(), "t7");
    }
}
