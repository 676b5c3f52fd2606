use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::model::{id_key, keyed_rng, simulate_vote, DifficultyModel, Stream, WorkerModel};
use super::SimulationError;
use crate::annotation::{estimate_consensus_accuracy, CellClass, ItemId, Vote, WorkerId};

/// Inputs of one simulated annotation campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_workers: usize,
    pub k: usize,
    /// One model per worker, or a single model shared by all of them.
    pub models: Vec<WorkerModel>,
    pub difficulty: DifficultyModel,
    pub seed: u64,
    /// Timestamp of the first vote; later votes follow one second apart.
    pub start: DateTime<Utc>,
}

impl ExperimentConfig {
    pub fn new(n_workers: usize, k: usize, model: WorkerModel, difficulty: DifficultyModel, seed: u64) -> Self {
        Self {
            n_workers,
            k,
            models: vec![model],
            difficulty,
            seed,
            start: DateTime::from_timestamp(1_700_000_000, 0).expect("valid timestamp"),
        }
    }

    pub fn worker_id(&self, index: usize) -> WorkerId {
        if self.models.len() == self.n_workers {
            self.models[index].worker_id.clone()
        } else {
            WorkerId::new(format!("sim{:04}", index + 1))
        }
    }

    fn model(&self, index: usize) -> &WorkerModel {
        if self.models.len() == 1 {
            &self.models[0]
        } else {
            &self.models[index]
        }
    }

    fn validate(&self) -> Result<(), SimulationError> {
        if self.k == 0 {
            return Err(SimulationError::InvalidModel("k must be positive".into()));
        }
        if self.n_workers < self.k {
            return Err(SimulationError::InsufficientWorkers {
                have: self.n_workers,
                need: self.k,
            });
        }
        if self.models.is_empty() || (self.models.len() != 1 && self.models.len() != self.n_workers) {
            return Err(SimulationError::InvalidModel(format!(
                "{} models for {} workers",
                self.models.len(),
                self.n_workers
            )));
        }
        self.difficulty.validate()
    }
}

/// `k` distinct workers for an item, from a generator keyed by the item.
fn pick_workers(config: &ExperimentConfig, item_key: u64) -> Vec<usize> {
    let mut rng = keyed_rng(config.seed, 0, item_key, Stream::Assignment);
    rand::seq::index::sample(&mut rng, config.n_workers, config.k).into_vec()
}

/// Votes for every item, `k` per item from distinct workers, in item order.
pub fn run_experiment(
    config: &ExperimentConfig,
    items: &[(ItemId, CellClass)],
) -> Result<Vec<Vote>, SimulationError> {
    config.validate()?;
    let ids: Vec<WorkerId> = (0..config.n_workers).map(|i| config.worker_id(i)).collect();
    let mut votes = Vec::with_capacity(items.len() * config.k);
    for (item_id, truth) in items {
        let item_key = id_key(item_id.as_str());
        for w in pick_workers(config, item_key) {
            let label = simulate_vote(
                config.model(w),
                *truth,
                item_key,
                w as u64,
                &config.difficulty,
                config.seed,
            );
            let at = config.start + Duration::seconds(votes.len() as i64);
            votes.push(Vote::new(item_id.clone(), ids[w].clone(), label, at));
        }
    }
    Ok(votes)
}

/// Monte-Carlo estimate of a proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
    pub n: usize,
}

impl Estimate {
    fn from_hits(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            value: p,
            standard_error: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }
}

/// Share of `n_items` cells of class `truth` whose `k` votes contain at
/// least `quorum` correct answers. Items are keyed by their index, so equal
/// seeds give common random numbers across `difficulty` settings.
pub fn consensus_accuracy(
    model: &WorkerModel,
    truth: CellClass,
    difficulty: &DifficultyModel,
    n_items: usize,
    k: usize,
    quorum: u32,
    seed: u64,
) -> Estimate {
    let mut hits = 0;
    for item in 0..n_items as u64 {
        let correct = (0..k as u64)
            .filter(|&w| simulate_vote(model, truth, item, w, difficulty, seed) == truth)
            .count();
        if correct as u32 >= quorum {
            hits += 1;
        }
    }
    Estimate::from_hits(hits, n_items)
}

/// Per-vote accuracy over the same draws as [`consensus_accuracy`].
pub fn vote_accuracy(
    model: &WorkerModel,
    truth: CellClass,
    difficulty: &DifficultyModel,
    n_items: usize,
    k: usize,
    seed: u64,
) -> Estimate {
    let mut hits = 0;
    for item in 0..n_items as u64 {
        hits += (0..k as u64)
            .filter(|&w| simulate_vote(model, truth, item, w, difficulty, seed) == truth)
            .count();
    }
    Estimate::from_hits(hits, n_items * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub n_items: usize,
    pub k: usize,
    pub quorum: u32,
    /// Width of the final bracket on rho.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            n_items: 20_000,
            k: 5,
            quorum: 3,
            tolerance: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub class: CellClass,
    pub alpha: f64,
    pub target: f64,
    pub rho: f64,
    pub achieved: Estimate,
    /// Rho values whose simulated accuracy equals `target` plus or minus
    /// 1.96 standard errors.
    pub rho_interval: (f64, f64),
}

/// Finds, per class, the `rho` at which the simulated consensus accuracy of
/// `model` meets `targets[class]`.
///
/// A target is reachable when it lies between `alpha` (all answers
/// item-driven) and the independent-worker estimate.
pub fn calibrate_correlation(
    model: &WorkerModel,
    targets: [f64; 3],
    settings: &CalibrationSettings,
) -> Result<[Calibration; 3], SimulationError> {
    let mut out = Vec::with_capacity(3);
    for class in CellClass::ALL {
        let alpha = model.accuracy(class);
        let target = targets[class.index()];
        let upper = estimate_consensus_accuracy(alpha, settings.k as u32, settings.quorum)
            .map_err(|e| SimulationError::InvalidModel(e.to_string()))?;
        let (lo_bound, hi_bound) = (alpha.min(upper), alpha.max(upper));
        if !(lo_bound..=hi_bound).contains(&target) {
            return Err(SimulationError::TargetUnreachable {
                class,
                target,
                lowest: lo_bound,
                highest: hi_bound,
            });
        }
        let acc = |rho: f64| {
            consensus_accuracy(
                model,
                class,
                &DifficultyModel::correlated(rho),
                settings.n_items,
                settings.k,
                settings.quorum,
                settings.seed,
            )
        };
        let solve = |goal: f64| bisect(|rho| acc(rho).value - goal, settings.tolerance);
        let rho = solve(target);
        let achieved = acc(rho);
        let half = 1.96 * achieved.standard_error;
        let a = solve(target + half);
        let b = solve(target - half);
        out.push(Calibration {
            class,
            alpha,
            target,
            rho,
            achieved,
            rho_interval: (a.min(b), a.max(b)),
        });
    }
    Ok(out.try_into().expect("three classes"))
}

/// Root of a function that decreases on `[0, 1]`, clamped to the ends.
fn bisect(f: impl Fn(f64) -> f64, tolerance: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
