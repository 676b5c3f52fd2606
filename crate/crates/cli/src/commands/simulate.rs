use std::collections::HashMap;
use std::path::PathBuf;

use chrono::Duration;
use crowdcell_core::annotation::{CellClass, ItemId, Vote};
use crowdcell_core::benchmark::reference_corpus;
use crowdcell_core::dataset::{Dataset, GroundTruthRecord};
use crowdcell_core::records::write_votes;
use crowdcell_core::simulation::{
    calibrate_correlation, run_experiment, CalibrationSettings, DifficultyModel, ExperimentConfig,
    WorkerModel, REFERENCE_VOTE_COUNTS,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{create_file, from_table, load_truth};
use crate::error::{from_simulation, CliError};
use crate::manifest::RunRecorder;
use crate::{Context, SimulateArgs};

/// The `[simulate]` config table. Flags win over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub workers: usize,
    pub k: usize,
    pub alpha: Option<[f64; 3]>,
    pub rho: Vec<f64>,
    pub calibrate: Option<[f64; 3]>,
    pub calibration_items: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            workers: 5,
            k: 5,
            alpha: None,
            rho: vec![0.0],
            calibrate: None,
            calibration_items: 20_000,
        }
    }
}

fn three(v: &[f64], what: &str) -> Result<[f64; 3], CliError> {
    v.try_into()
        .map_err(|_| CliError::Usage(format!("{what} needs three values")))
}

impl SimulateConfig {
    fn merge(mut self, args: &SimulateArgs) -> Result<Self, CliError> {
        if let Some(n) = args.workers {
            self.workers = n;
        }
        if let Some(k) = args.k {
            self.k = k;
        }
        if let Some(a) = &args.alpha {
            self.alpha = Some(three(a, "--alpha")?);
        }
        if let Some(r) = &args.rho {
            self.rho = r.clone();
            self.calibrate = None;
        }
        if let Some(t) = &args.calibrate {
            self.calibrate = Some(three(t, "--calibrate")?);
        }
        if let Some(n) = args.calibration_items {
            self.calibration_items = n;
        }
        if !(self.rho.len() == 1 || self.rho.len() == 3) {
            return Err(CliError::Usage("rho takes one value or three".into()));
        }
        Ok(self)
    }
}

fn synthetic_truth(counts: &[usize]) -> Result<Dataset, CliError> {
    let mut records = Vec::new();
    for (class, &n) in CellClass::ALL.iter().zip(counts) {
        for _ in 0..n {
            let id = ItemId::new(format!("sim_{:06}", records.len() + 1));
            records.push(GroundTruthRecord {
                crop_path: PathBuf::from(format!("crops/{id}.png")),
                item_id: id,
                true_label: *class,
                source_image_id: "simulated".into(),
            });
        }
    }
    Dataset::from_records(records).map_err(|e| CliError::Data(e.to_string()))
}

pub fn run(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let seed = ctx.seed.unwrap_or(0);
    let mut rec = RunRecorder::new("simulate", Some(seed), ctx.config)?;
    let out = ctx.out_or_cwd()?;

    let (truth, votes) = if args.reference {
        rec.params(json!({ "reference": true }));
        let c = reference_corpus();
        (c.truth, c.votes)
    } else {
        let cfg = SimulateConfig::merge(from_table("simulate", ctx.section("simulate")?)?, args)?;
        let truth = match (&args.truth, &args.counts) {
            (Some(path), _) => {
                rec.input(path)?;
                load_truth(path)?
            }
            (None, Some(counts)) if counts.len() == 3 => synthetic_truth(counts)?,
            (None, Some(_)) => return Err(CliError::Usage("--counts needs three values".into())),
            (None, None) => {
                return Err(CliError::Usage(
                    "one of --truth, --counts or --reference is required".into(),
                ))
            }
        };
        let model = match cfg.alpha {
            Some(a) => WorkerModel::with_accuracy("sim", a, &REFERENCE_VOTE_COUNTS).map_err(from_simulation)?,
            None => WorkerModel::reference("sim"),
        };
        let rho: Vec<f64> = match cfg.calibrate {
            Some(targets) => {
                let settings = CalibrationSettings {
                    n_items: cfg.calibration_items,
                    k: cfg.k,
                    quorum: (cfg.k / 2 + 1) as u32,
                    tolerance: 1e-3,
                    seed,
                };
                let cal = calibrate_correlation(&model, targets, &settings).map_err(from_simulation)?;
                for c in &cal {
                    println!(
                        "calibrated {}: alpha {:.4} target {:.4} rho {:.4} achieved {:.4} +- {:.4}",
                        c.class,
                        c.alpha,
                        c.target,
                        c.rho,
                        c.achieved.value,
                        c.achieved.standard_error
                    );
                }
                cal.iter().map(|c| c.rho).collect()
            }
            None => cfg.rho.clone(),
        };
        rec.params(json!({ "config": cfg, "model": model, "rho": rho }));
        let votes = simulate(&cfg, &model, &rho, &truth, seed)?;
        (truth, votes)
    };

    let votes_path = out.join("votes.csv");
    write_votes(create_file(&votes_path)?, &votes).map_err(|e| CliError::data(&votes_path, e))?;
    let truth_path = out.join("truth.csv");
    truth
        .write_manifest(create_file(&truth_path)?)
        .map_err(|e| CliError::data(&truth_path, e))?;
    rec.output(&votes_path)?;
    rec.output(&truth_path)?;
    println!("items: {}", truth.len());
    println!("votes: {}", votes.len());
    rec.finish(&out)?;
    Ok(())
}

/// Runs one experiment, or one per class when `rho` has three values and
/// then puts the votes back in item order.
fn simulate(
    cfg: &SimulateConfig,
    model: &WorkerModel,
    rho: &[f64],
    truth: &Dataset,
    seed: u64,
) -> Result<Vec<Vote>, CliError> {
    let items: Vec<(ItemId, CellClass)> = truth
        .records()
        .iter()
        .map(|r| (r.item_id.clone(), r.true_label))
        .collect();
    let experiment = |rho: f64| {
        ExperimentConfig::new(cfg.workers, cfg.k, model.clone(), DifficultyModel::correlated(rho), seed)
    };
    if rho.len() == 1 {
        return run_experiment(&experiment(rho[0]), &items).map_err(from_simulation);
    }
    let mut by_item: HashMap<ItemId, Vec<Vote>> = HashMap::new();
    let mut start = None;
    for class in CellClass::ALL {
        let subset: Vec<_> = items.iter().filter(|(_, c)| *c == class).cloned().collect();
        let exp = experiment(rho[class.index()]);
        start.get_or_insert(exp.start);
        for v in run_experiment(&exp, &subset).map_err(from_simulation)? {
            by_item.entry(v.item_id.clone()).or_default().push(v);
        }
    }
    let start = start.expect("three classes");
    let mut votes = Vec::with_capacity(items.len() * cfg.k);
    for (id, _) in &items {
        for mut v in by_item.remove(id).unwrap_or_default() {
            v.submitted_at = start + Duration::seconds(votes.len() as i64);
            votes.push(v);
        }
    }
    Ok(votes)
}
