//! A fixed 848-item, 4240-vote corpus used by tests and the benchmark
//! command.
//!
//! Its per-vote matrix is `[[2676, 58, 351], [48, 614, 243], [69, 28, 153]]`,
//! consensus gets 566/617, 128/181 and 32/50 items right, and the agreement
//! histogram is 463 unanimous, 226 four-one, 135 three-way and 24 without
//! consensus.

use chrono::{DateTime, Duration, Utc};

use crate::annotation::{CellClass, ItemId, Vote, WorkerId};
use crate::dataset::{Dataset, GroundTruthRecord};

/// `(true class, votes for circular/elongated/other, number of items)`.
pub const BALLOT_MIX: [(CellClass, [u32; 3], usize); 17] = [
    (CellClass::Circular, [1, 0, 4], 9),
    (CellClass::Circular, [1, 3, 1], 1),
    (CellClass::Circular, [2, 0, 3], 28),
    (CellClass::Circular, [2, 1, 2], 13),
    (CellClass::Circular, [3, 0, 2], 102),
    (CellClass::Circular, [4, 1, 0], 42),
    (CellClass::Circular, [5, 0, 0], 422),
    (CellClass::Elongated, [0, 1, 4], 42),
    (CellClass::Elongated, [0, 4, 1], 53),
    (CellClass::Elongated, [0, 5, 0], 38),
    (CellClass::Elongated, [1, 2, 2], 11),
    (CellClass::Elongated, [1, 4, 0], 37),
    (CellClass::Other, [0, 0, 5], 3),
    (CellClass::Other, [0, 1, 4], 28),
    (CellClass::Other, [1, 0, 4], 1),
    (CellClass::Other, [3, 0, 2], 4),
    (CellClass::Other, [4, 0, 1], 14),
];

pub const WORKER_POOL: usize = 40;

pub struct BenchmarkCorpus {
    pub truth: Dataset,
    pub votes: Vec<Vote>,
}

pub fn item_id(index: usize) -> ItemId {
    ItemId::new(format!("cell_{:04}", index + 1))
}

/// Builds the corpus. Items are numbered in [`BALLOT_MIX`] order; item `i`
/// is labelled by workers `5i .. 5i + 4` modulo [`WORKER_POOL`].
pub fn reference_corpus() -> BenchmarkCorpus {
    let start: DateTime<Utc> = DateTime::from_timestamp(1_690_000_000, 0).expect("valid");
    let mut records = Vec::new();
    let mut votes = Vec::new();
    let mut index = 0;
    for (truth, counts, n) in BALLOT_MIX {
        for _ in 0..n {
            let id = item_id(index);
            records.push(GroundTruthRecord {
                item_id: id.clone(),
                true_label: truth,
                source_image_id: format!("smear_{:02}", index / 40),
                crop_path: format!("crops/{id}.png").into(),
            });
            let labels = CellClass::ALL
                .iter()
                .zip(counts)
                .flat_map(|(&c, k)| std::iter::repeat_n(c, k as usize));
            for (j, label) in labels.enumerate() {
                let w = (5 * index + j) % WORKER_POOL;
                let at = start + Duration::seconds((5 * index + j) as i64 * 7);
                votes.push(Vote::new(id.clone(), WorkerId::new(format!("w{:02}", w + 1)), label, at));
            }
            index += 1;
        }
    }
    BenchmarkCorpus {
        truth: Dataset::from_records(records).expect("unique ids"),
        votes,
    }
}
