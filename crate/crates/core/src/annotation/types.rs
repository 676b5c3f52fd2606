use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::AnnotationError;

/// Morphological class of a red blood cell.
///
/// The declaration order is the canonical order used for matrix rows,
/// serialization and tie-free iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellClass {
    Circular,
    Elongated,
    Other,
}

impl CellClass {
    pub const ALL: [CellClass; 3] = [CellClass::Circular, CellClass::Elongated, CellClass::Other];

    pub const fn index(self) -> usize {
        match self {
            CellClass::Circular => 0,
            CellClass::Elongated => 1,
            CellClass::Other => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            CellClass::Circular => "circular",
            CellClass::Elongated => "elongated",
            CellClass::Other => "other",
        }
    }

    /// Collapses the deformed classes into one.
    pub const fn merge(self) -> MergedClass {
        match self {
            CellClass::Circular => MergedClass::Circular,
            CellClass::Elongated | CellClass::Other => MergedClass::NotCircular,
        }
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CellClass {
    type Err = AnnotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "circular" | "c" => Ok(CellClass::Circular),
            "elongated" | "e" => Ok(CellClass::Elongated),
            "other" | "o" => Ok(CellClass::Other),
            _ => Err(AnnotationError::UnknownLabel(s.to_string())),
        }
    }
}

/// Two-class alphabet: normal cells against any deformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergedClass {
    Circular,
    NotCircular,
}

impl MergedClass {
    pub const ALL: [MergedClass; 2] = [MergedClass::Circular, MergedClass::NotCircular];

    pub const fn index(self) -> usize {
        match self {
            MergedClass::Circular => 0,
            MergedClass::NotCircular => 1,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            MergedClass::Circular => "circular",
            MergedClass::NotCircular => "not_circular",
        }
    }
}

impl fmt::Display for MergedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Opaque identifier of a labelled item (one cell crop).
    ItemId
);
string_id!(
    /// Opaque identifier of a labeller.
    WorkerId
);

/// One worker's answer for one item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub item_id: ItemId,
    pub worker_id: WorkerId,
    pub label: CellClass,
    pub submitted_at: DateTime<Utc>,
}

impl Vote {
    pub fn new(
        item_id: impl Into<ItemId>,
        worker_id: impl Into<WorkerId>,
        label: CellClass,
        submitted_at: DateTime<Utc>,
    ) -> Self {
        Self {
            item_id: item_id.into(),
            worker_id: worker_id.into(),
            label,
            submitted_at,
        }
    }
}

/// The votes collected for a single item, at most `k` of them, each from a
/// different worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    item_id: ItemId,
    k: usize,
    votes: Vec<Vote>,
}

impl Ballot {
    pub fn new(item_id: impl Into<ItemId>, k: usize) -> Self {
        assert!(k >= 1, "ballot redundancy must be positive");
        Self {
            item_id: item_id.into(),
            k,
            votes: Vec::with_capacity(k),
        }
    }

    pub fn from_votes(
        item_id: impl Into<ItemId>,
        k: usize,
        votes: impl IntoIterator<Item = Vote>,
    ) -> Result<Self, AnnotationError> {
        let mut ballot = Self::new(item_id, k);
        for vote in votes {
            ballot.push(vote)?;
        }
        Ok(ballot)
    }

    pub fn push(&mut self, vote: Vote) -> Result<(), AnnotationError> {
        if vote.item_id != self.item_id {
            return Err(AnnotationError::WrongItem {
                expected: self.item_id.clone(),
                got: vote.item_id,
            });
        }
        if self.votes.iter().any(|v| v.worker_id == vote.worker_id) {
            return Err(AnnotationError::DuplicateWorker {
                item_id: self.item_id.clone(),
                worker_id: vote.worker_id,
            });
        }
        if self.votes.len() == self.k {
            return Err(AnnotationError::BallotFull(self.item_id.clone()));
        }
        self.votes.push(vote);
        Ok(())
    }

    pub fn item_id(&self) -> &ItemId {
        &self.item_id
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    pub fn is_complete(&self) -> bool {
        self.votes.len() == self.k
    }

    /// Votes per class, indexed by [`CellClass::index`].
    pub fn counts(&self) -> [u32; 3] {
        let mut counts = [0u32; 3];
        for vote in &self.votes {
            counts[vote.label.index()] += 1;
        }
        counts
    }
}
