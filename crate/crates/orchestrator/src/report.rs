use serde::{Deserialize, Serialize};

use crowdcell_core::annotation::{aggregate_corpus, ConsensusResult, ConsensusRule};
use crowdcell_core::dataset::{Dataset, GroundTruthRecord};
use crowdcell_core::metrics::{full_report, FullReport, MatrixStack, NaPolicy};

use crate::model::*;
use crate::state::State;
use crate::OrchestratorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCount {
    pub pattern: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub approved_assignments: u64,
    pub rewards_usd: f64,
    pub fee_rate: f64,
    pub fees_usd: f64,
    pub total_usd: f64,
    /// Submitted, not yet approved or rejected.
    pub pending_usd: f64,
    pub consensus_labels: usize,
    pub cost_per_label_usd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub batch_id: BatchId,
    pub items: usize,
    pub tasks_open: usize,
    pub tasks_complete: usize,
    pub tasks_expired: usize,
    pub votes: usize,
    pub complete_ballots: usize,
    pub incomplete_ballots: usize,
    pub no_consensus: usize,
    pub histogram: Vec<PatternCount>,
    pub consensus: Vec<ConsensusResult>,
    pub cost: CostSummary,
    /// Present when every item of the batch carries a truth label.
    pub metrics: Option<FullReport>,
}

pub fn batch_report(state: &State, id: BatchId, fee_rate: f64) -> Result<BatchReport, OrchestratorError> {
    let batch = state.batch(id)?;
    let tasks: Vec<&Task> = batch.tasks.iter().map(|t| &state.tasks[t]).collect();
    let k = tasks.first().map(|t| t.k).unwrap_or(1);
    let rule = ConsensusRule::majority(k);
    let votes = state.batch_votes(id)?;
    let agg = aggregate_corpus(&votes, &rule).map_err(|e| OrchestratorError::Storage(e.to_string()))?;

    let (mut approved, mut paid, mut pending) = (0u64, 0u64, 0u64);
    for t in &tasks {
        for a in t.assignments.iter().map(|a| &state.assignments[a]) {
            match a.state {
                AssignmentState::Approved => {
                    approved += 1;
                    paid += t.reward;
                }
                AssignmentState::Submitted => pending += t.reward,
                _ => {}
            }
        }
    }
    let labels = agg.results.iter().filter(|r| !r.is_no_consensus()).count();
    let fees = usd(paid) * fee_rate;
    let total = usd(paid) + fees;
    let cost = CostSummary {
        approved_assignments: approved,
        rewards_usd: usd(paid),
        fee_rate,
        fees_usd: fees,
        total_usd: total,
        pending_usd: usd(pending),
        consensus_labels: labels,
        cost_per_label_usd: (labels > 0).then(|| total / labels as f64),
    };

    let metrics = if batch.items.iter().all(|i| i.truth.is_some()) && !agg.results.is_empty() {
        let truth = Dataset::from_records(batch.items.iter().map(|i| GroundTruthRecord {
            item_id: i.item_id.clone(),
            true_label: i.truth.expect("checked above"),
            source_image_id: String::new(),
            crop_path: i.image.clone().unwrap_or_default().into(),
        }))
        .map_err(|e| OrchestratorError::Storage(e.to_string()))?;
        let complete: std::collections::BTreeSet<_> = agg.results.iter().map(|r| &r.item_id).collect();
        let counted = votes.iter().filter(|v| complete.contains(&v.item_id));
        let stack = MatrixStack::build(counted, &agg.results, &truth, &rule)
            .map_err(|e| OrchestratorError::Storage(e.to_string()))?;
        Some(full_report(&stack, NaPolicy::Exclude))
    } else {
        None
    };

    let count = |s: TaskState| tasks.iter().filter(|t| t.state == s).count();
    Ok(BatchReport {
        batch_id: id,
        items: batch.items.len(),
        tasks_open: count(TaskState::Open),
        tasks_complete: count(TaskState::Complete),
        tasks_expired: count(TaskState::Expired),
        votes: votes.len(),
        complete_ballots: agg.results.len(),
        incomplete_ballots: agg.incomplete.len(),
        no_consensus: agg.results.iter().filter(|r| r.is_no_consensus()).count(),
        histogram: agg
            .histogram
            .iter()
            .map(|(p, n)| PatternCount {
                pattern: p.to_string(),
                count: n,
            })
            .collect(),
        consensus: agg.results,
        cost,
        metrics,
    })
}
