pub mod aggregate;
pub mod batch;
pub mod estimate;
pub mod report;
pub mod segment;
pub mod serve;
pub mod simulate;

use std::fs::File;
use std::path::Path;

use crowdcell_core::annotation::{AgreementPattern, ConsensusRule, PatternHistogram, Vote};
use crowdcell_core::dataset::{ingest_dataset, Dataset};
use crowdcell_core::records::read_votes;
use serde::de::DeserializeOwned;

use crate::error::{from_dataset, from_records, CliError};

pub(crate) fn load_votes(path: &Path) -> Result<Vec<Vote>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_votes(f).map_err(|e| from_records(path, e))
}

pub(crate) fn load_truth(path: &Path) -> Result<Dataset, CliError> {
    ingest_dataset(path).map_err(|e| from_dataset(path, e))
}

pub(crate) fn rule(k: usize, quorum: u32) -> Result<ConsensusRule, CliError> {
    ConsensusRule::new(k, quorum).map_err(|e| CliError::Usage(e.to_string()))
}

pub(crate) fn from_table<T: DeserializeOwned>(name: &str, table: toml::Table) -> Result<T, CliError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| CliError::Usage(format!("config [{name}]: {e}")))
}

pub(crate) fn create_file(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::io(path, e))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Histogram grouped by the size of the largest block, e.g.
/// `5:463 4-1:226 3-*:135 2-2-1:24`. A level with several patterns is
/// written `n-*`.
pub fn agreement_summary(h: &PatternHistogram) -> String {
    let mut levels: Vec<(u32, Vec<(AgreementPattern, usize)>)> = Vec::new();
    for (p, n) in h.iter() {
        match levels.last_mut() {
            Some((level, v)) if *level == p.max_count() => v.push((p, n)),
            _ => levels.push((p.max_count(), vec![(p, n)])),
        }
    }
    levels
        .into_iter()
        .map(|(level, v)| {
            let n: usize = v.iter().map(|(_, n)| n).sum();
            if v.len() == 1 {
                format!("{}:{n}", v[0].0)
            } else {
                format!("{level}-*:{n}")
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
