use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimulationError;
use crate::annotation::{CellClass, WorkerId};

/// Per-vote counts used for the default worker: rows are the true class,
/// columns the answer.
pub const REFERENCE_VOTE_COUNTS: [[u64; 3]; 3] = [[2676, 58, 351], [48, 614, 243], [69, 28, 153]];

/// A simulated labeller. Row `t` of `confusion` is the answer distribution
/// for a cell of true class `t`; its diagonal entry is the accuracy on that
/// class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerModel {
    pub worker_id: WorkerId,
    pub confusion: [[f64; 3]; 3],
    #[serde(default)]
    pub seed: u64,
}

impl WorkerModel {
    pub fn new(
        worker_id: impl Into<WorkerId>,
        confusion: [[f64; 3]; 3],
        seed: u64,
    ) -> Result<Self, SimulationError> {
        for (t, row) in confusion.iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SimulationError::InvalidModel(format!(
                    "row {t} has an entry outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SimulationError::InvalidModel(format!("row {t} sums to {sum}")));
            }
        }
        Ok(Self {
            worker_id: worker_id.into(),
            confusion,
            seed,
        })
    }

    /// Accuracy `alpha[c]` per class with errors split as in `counts`.
    pub fn with_accuracy(
        worker_id: impl Into<WorkerId>,
        alpha: [f64; 3],
        counts: &[[u64; 3]; 3],
    ) -> Result<Self, SimulationError> {
        let mut confusion = [[0.0; 3]; 3];
        for t in 0..3 {
            if !(0.0..=1.0).contains(&alpha[t]) {
                return Err(SimulationError::InvalidModel(format!(
                    "accuracy {} is not a probability",
                    alpha[t]
                )));
            }
            let wrong: u64 = (0..3).filter(|&p| p != t).map(|p| counts[t][p]).sum();
            for p in 0..3 {
                confusion[t][p] = if p == t {
                    alpha[t]
                } else if wrong > 0 {
                    (1.0 - alpha[t]) * counts[t][p] as f64 / wrong as f64
                } else {
                    (1.0 - alpha[t]) / 2.0
                };
            }
        }
        Self::new(worker_id, confusion, 0)
    }

    /// Rows taken straight from [`REFERENCE_VOTE_COUNTS`].
    pub fn reference(worker_id: impl Into<WorkerId>) -> Self {
        let c = &REFERENCE_VOTE_COUNTS;
        let alpha = [0, 1, 2].map(|t| c[t][t] as f64 / c[t].iter().sum::<u64>() as f64);
        Self::with_accuracy(worker_id, alpha, c).expect("reference rows are valid")
    }

    pub fn accuracy(&self, class: CellClass) -> f64 {
        self.confusion[class.index()][class.index()]
    }

    /// Picks a wrong class for `truth` from the off-diagonal of its row,
    /// using `u` in `[0, 1)`.
    fn wrong_class(&self, truth: CellClass, u: f64) -> CellClass {
        let row = &self.confusion[truth.index()];
        let others: Vec<usize> = (0..3).filter(|&p| p != truth.index()).collect();
        let mass: f64 = others.iter().map(|&p| row[p]).sum();
        if mass <= 0.0 {
            return CellClass::ALL[others[(u * 2.0) as usize % 2]];
        }
        let mut acc = 0.0;
        for &p in &others {
            acc += row[p] / mass;
            if u < acc {
                return CellClass::ALL[p];
            }
        }
        CellClass::ALL[*others.last().unwrap()]
    }
}

/// Item-driven correlation between workers.
///
/// Each item has a difficulty `d` uniform on `[0, 1)`. A worker answers from
/// the item with probability `rho` (correct iff `d < alpha`) and on their
/// own otherwise (correct with probability `alpha`), so
/// `P(correct) = (1 - rho) * alpha + rho * [d < alpha]` and the marginal
/// accuracy stays `alpha` for every `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DifficultyModel {
    pub rho: f64,
    /// Item-driven answers also share the wrong class.
    pub shared_errors: bool,
}

impl Default for DifficultyModel {
    fn default() -> Self {
        Self::independent()
    }
}

impl DifficultyModel {
    pub fn independent() -> Self {
        Self {
            rho: 0.0,
            shared_errors: true,
        }
    }

    pub fn correlated(rho: f64) -> Self {
        Self {
            rho,
            shared_errors: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(SimulationError::InvalidModel(format!(
                "rho {} outside [0, 1]",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Random streams of the keyed generator.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Vote = 1,
    Item = 2,
    Assignment = 3,
}

pub(crate) fn keyed_rng(seed: u64, worker: u64, item: u64, stream: Stream) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&worker.to_le_bytes());
    key[16..24].copy_from_slice(&item.to_le_bytes());
    key[24..].copy_from_slice(&(stream as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Stable 64-bit key for a string id (FNV-1a).
pub fn id_key(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// One vote. The outcome depends only on `(seed, model.seed, worker_key,
/// item_key)`, never on call order.
pub fn simulate_vote(
    model: &WorkerModel,
    truth: CellClass,
    item_key: u64,
    worker_key: u64,
    difficulty: &DifficultyModel,
    seed: u64,
) -> CellClass {
    let seed = seed ^ model.seed.rotate_left(32);
    let alpha = model.accuracy(truth);
    // fixed draw order: mix, own answer, own error
    let mut own = keyed_rng(seed, worker_key, item_key, Stream::Vote);
    let (mix, answer, own_error): (f64, f64, f64) = (own.random(), own.random(), own.random());
    let from_item = mix < difficulty.rho;
    let (correct, u) = if from_item {
        let mut shared = keyed_rng(seed, u64::MAX, item_key, Stream::Item);
        let (d, item_error): (f64, f64) = (shared.random(), shared.random());
        let u = if difficulty.shared_errors { item_error } else { own_error };
        (d < alpha, u)
    } else {
        (answer < alpha, own_error)
    };
    if correct {
        return truth;
    }
    model.wrong_class(truth, u)
}
