use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scores::*;
use super::{build_consensus_matrix, build_vote_matrix, ConfusionMatrix, MetricsError};
use crate::annotation::{estimate_consensus_accuracy, ConsensusResult, ConsensusRule, Vote};
use crate::dataset::Dataset;

/// Every metric for one matrix. Absent values are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_classes: usize,
    pub na_policy: NaPolicy,
    pub total: u64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub overall_accuracy: Option<f64>,
    pub f_macro: Option<f64>,
    pub f_weighted: Option<f64>,
    pub sds_score: Option<f64>,
    pub cba: Option<f64>,
    pub balanced_accuracy: Option<f64>,
    pub mcc: Option<f64>,
    pub na_rate: f64,
}

impl MetricsReport {
    pub fn compute(m: &ConfusionMatrix, policy: NaPolicy) -> Self {
        let na = m.na_total();
        let all = m.total() + na;
        Self {
            n_classes: m.n_classes(),
            na_policy: policy,
            total: all,
            per_class_accuracy: per_class_accuracy(m, policy),
            overall_accuracy: overall_accuracy(m, policy),
            f_macro: f_measure_with(m, Averaging::Macro, policy),
            f_weighted: f_measure_with(m, Averaging::Weighted, policy),
            sds_score: sds_with(m, policy),
            cba: cba_with(m, policy),
            balanced_accuracy: balanced_accuracy_with(m, policy),
            mcc: mcc_with(m, policy),
            na_rate: if all > 0 { na as f64 / all as f64 } else { 0.0 },
        }
    }

    fn named(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("sds", self.sds_score),
            ("f_macro", self.f_macro),
            ("f_weighted", self.f_weighted),
            ("cba", self.cba),
            ("balanced_accuracy", self.balanced_accuracy),
            ("mcc", self.mcc),
            ("accuracy", self.overall_accuracy),
        ]
    }
}

/// The matrices a full report is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixStack {
    pub k: usize,
    pub quorum: u32,
    /// One cell per vote.
    pub individual: ConfusionMatrix,
    /// One cell per item, N/A for no consensus.
    pub consensus: ConfusionMatrix,
    /// Consensus matrices restricted to items with the given agreement level.
    pub by_agreement: BTreeMap<u32, ConfusionMatrix>,
}

impl MatrixStack {
    pub fn build<'a, 'b>(
        votes: impl IntoIterator<Item = &'a Vote>,
        results: impl IntoIterator<Item = &'b ConsensusResult> + Clone,
        truth: &Dataset,
        rule: &ConsensusRule,
    ) -> Result<Self, MetricsError> {
        let individual = build_vote_matrix(votes, truth)?;
        let consensus = build_consensus_matrix(results.clone(), truth)?;
        let mut by_agreement = BTreeMap::new();
        for level in (rule.quorum()..=rule.k() as u32).rev() {
            let subset = results.clone().into_iter().filter(|r| r.agreement() == Some(level));
            by_agreement.insert(level, build_consensus_matrix(subset, truth)?);
        }
        Ok(Self {
            k: rule.k(),
            quorum: rule.quorum(),
            individual,
            consensus,
            by_agreement,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub three_class: MetricsReport,
    pub two_class: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceRow {
    pub class: String,
    pub individual_accuracy: Option<f64>,
    pub estimated: Option<f64>,
    pub observed: Option<f64>,
}

/// A published figure set against the value computed here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub table: String,
    pub row: String,
    pub metric: String,
    pub reference: f64,
    pub computed: Option<f64>,
    pub matches: bool,
    /// Another metric of ours that reproduces the reference, if any.
    pub matched_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub na_policy: NaPolicy,
    pub individual: ConfusionMatrix,
    pub consensus: ConfusionMatrix,
    pub individual_accuracy: Vec<Option<f64>>,
    pub consensus_accuracy: Vec<Option<f64>>,
    pub independence: Vec<IndependenceRow>,
    pub rows: Vec<ReportRow>,
    pub reference_checks: Vec<ReferenceCheck>,
}

/// Reference figures for the per-vote ("individual") row: SDS, F, CBA, MCC,
/// three-class then two-class.
pub const INDIVIDUAL_REFERENCE: [(usize, &str, f64); 8] = [
    (3, "sds", 0.8759),
    (3, "f", 0.7802),
    (3, "cba", 0.7193),
    (3, "mcc", 0.6748),
    (2, "sds", 0.8759),
    (2, "f", 0.8721),
    (2, "cba", 0.8831),
    (2, "mcc", 0.7194),
];

/// Values agree if they print the same at four decimals.
pub const REFERENCE_TOLERANCE: f64 = 5e-5;

fn row(name: &str, m: &ConfusionMatrix, policy: NaPolicy) -> ReportRow {
    let two = m.merge().unwrap_or_else(|_| m.clone());
    ReportRow {
        name: name.to_string(),
        three_class: MetricsReport::compute(m, policy),
        two_class: MetricsReport::compute(&two, policy),
    }
}

fn reference_checks(individual: &ReportRow) -> Vec<ReferenceCheck> {
    let mut out = Vec::new();
    for (n, metric, reference) in INDIVIDUAL_REFERENCE {
        let r = if n == 3 {
            &individual.three_class
        } else {
            &individual.two_class
        };
        let candidates: Vec<(&str, Option<f64>)> = r.named().to_vec();
        let computed = match metric {
            "sds" => r.sds_score,
            "f" => r.f_macro,
            "cba" => r.cba,
            _ => r.mcc,
        };
        let hit = |v: Option<f64>| v.is_some_and(|v| (v - reference).abs() <= REFERENCE_TOLERANCE);
        let matches = hit(computed);
        let matched_by = if matches {
            None
        } else {
            candidates
                .iter()
                .find(|(_, v)| hit(*v))
                .map(|(name, _)| name.to_string())
        };
        out.push(ReferenceCheck {
            table: format!("{n}-class"),
            row: individual.name.clone(),
            metric: metric.to_string(),
            reference,
            computed,
            matches,
            matched_by,
        });
    }
    out
}

/// Computes every metric for the per-vote matrix, the consensus matrix (once
/// with N/A as errors, once under `policy`) and each agreement level, in
/// three-class and merged two-class form.
pub fn full_report(stack: &MatrixStack, policy: NaPolicy) -> FullReport {
    let mut rows = vec![
        row("individual", &stack.individual, NaPolicy::Exclude),
        row("aggregated", &stack.consensus, NaPolicy::CountAsError),
        row("consensus", &stack.consensus, policy),
    ];
    for (level, m) in stack.by_agreement.iter().rev() {
        rows.push(row(&format!("{level} agree"), m, NaPolicy::Exclude));
    }
    let individual_accuracy = per_class_accuracy(&stack.individual, NaPolicy::Exclude);
    let consensus_accuracy = per_class_accuracy(&stack.consensus, NaPolicy::CountAsError);
    let independence = stack
        .individual
        .labels()
        .iter()
        .enumerate()
        .map(|(i, class)| IndependenceRow {
            class: class.clone(),
            individual_accuracy: individual_accuracy[i],
            estimated: individual_accuracy[i]
                .and_then(|a| estimate_consensus_accuracy(a, stack.k as u32, stack.quorum).ok()),
            observed: consensus_accuracy[i],
        })
        .collect();
    let reference_checks = if stack.individual.total() > 0 {
        reference_checks(&rows[0])
    } else {
        Vec::new()
    };
    FullReport {
        na_policy: policy,
        individual: stack.individual.clone(),
        consensus: stack.consensus.clone(),
        individual_accuracy,
        consensus_accuracy,
        independence,
        rows,
        reference_checks,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn pct(v: Option<f64>) -> String {
    v.map(|v| format!("{:.2}%", v * 100.0)).unwrap_or_else(|| "-".into())
}

impl FullReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Table 1. Per-vote classification");
        let _ = writeln!(
            s,
            "{:<14}{:>11}{:>11}{:>11}{:>8}{:>10}",
            "truth", "circular", "elongated", "other", "total", "accuracy"
        );
        for (i, label) in self.individual.labels().iter().enumerate() {
            let _ = write!(s, "{label:<14}");
            for c in &self.individual.rows()[i] {
                let _ = write!(s, "{c:>11}");
            }
            let _ = writeln!(
                s,
                "{:>8}{:>10}",
                self.individual.row_total(i),
                pct(self.individual_accuracy[i])
            );
        }

        let _ = writeln!(s, "\nTable 2. Consensus classification");
        let _ = writeln!(
            s,
            "{:<14}{:>9}{:>7}{:>7}{:>10}",
            "truth", "correct", "n/a", "total", "accuracy"
        );
        for (i, label) in self.consensus.labels().iter().enumerate() {
            let _ = writeln!(
                s,
                "{label:<14}{:>9}{:>7}{:>7}{:>10}",
                self.consensus.get(i, i),
                self.consensus.na(i),
                self.consensus.row_total(i) + self.consensus.na(i),
                pct(self.consensus_accuracy[i])
            );
        }

        let _ = writeln!(s, "\nTable 3. Independent-worker estimate against observed consensus");
        let _ = writeln!(s, "{:<14}{:>12}{:>12}{:>12}", "class", "individual", "estimated", "observed");
        for r in &self.independence {
            let _ = writeln!(
                s,
                "{:<14}{:>12}{:>12}{:>12}",
                r.class,
                pct(r.individual_accuracy),
                pct(r.estimated),
                pct(r.observed)
            );
        }

        for (title, two) in [("Table 4. Three classes", false), ("Table 5. Two classes", true)] {
            let _ = writeln!(s, "\n{title}");
            let _ = writeln!(
                s,
                "{:<12}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}",
                "row", "sds", "f_macro", "f_wtd", "cba", "bal_acc", "mcc", "n/a"
            );
            for r in &self.rows {
                let m = if two { &r.two_class } else { &r.three_class };
                let _ = writeln!(
                    s,
                    "{:<12}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9.4}",
                    r.name,
                    cell(m.sds_score),
                    cell(m.f_macro),
                    cell(m.f_weighted),
                    cell(m.cba),
                    cell(m.balanced_accuracy),
                    cell(m.mcc),
                    m.na_rate
                );
            }
        }

        if !self.reference_checks.is_empty() {
            let _ = writeln!(s, "\nReference check (individual row)");
            for c in &self.reference_checks {
                let status = if c.matches {
                    "ok".to_string()
                } else if let Some(alt) = &c.matched_by {
                    format!("MISMATCH (reproduced by {alt})")
                } else {
                    "MISMATCH".to_string()
                };
                let _ = writeln!(
                    s,
                    "{:<8}{:<6}reference {:.4}  computed {}  {}",
                    c.table,
                    c.metric,
                    c.reference,
                    cell(c.computed),
                    status
                );
            }
        }
        s
    }

    /// Long format: `table,row,metric,value`, empty value when absent.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("table,row,metric,value\n");
        let mut put = |table: &str, row: &str, metric: &str, v: Option<f64>| {
            let v = v.map(|v| format!("{v:.6}")).unwrap_or_default();
            let _ = writeln!(s, "{table},{row},{metric},{v}");
        };
        for (i, label) in self.individual.labels().iter().enumerate() {
            put("per_vote", label, "accuracy", self.individual_accuracy[i]);
        }
        for (i, label) in self.consensus.labels().iter().enumerate() {
            put("consensus", label, "accuracy", self.consensus_accuracy[i]);
        }
        for r in &self.independence {
            put("independence", &r.class, "estimated", r.estimated);
            put("independence", &r.class, "observed", r.observed);
        }
        for r in &self.rows {
            for (table, m) in [("3-class", &r.three_class), ("2-class", &r.two_class)] {
                for (name, v) in m.named() {
                    put(table, &r.name, name, v);
                }
                put(table, &r.name, "na_rate", Some(m.na_rate));
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
