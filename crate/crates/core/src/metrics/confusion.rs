use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::annotation::{CellClass, ConsensusResult, MergedClass, Outcome, Vote};
use crate::dataset::Dataset;

/// Square count table, rows are ground truth and columns predictions.
///
/// `na` holds, per true class, the items for which no prediction was made
/// (no consensus). It is empty of meaning for per-vote matrices and stays zero
/// there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
    na: Vec<u64>,
}

impl ConfusionMatrix {
    /// Zero matrix over the given class names.
    pub fn zeros<S: ToString>(labels: impl IntoIterator<Item = S>) -> Self {
        let labels: Vec<String> = labels.into_iter().map(|s| s.to_string()).collect();
        let n = labels.len();
        Self {
            labels,
            counts: vec![vec![0; n]; n],
            na: vec![0; n],
        }
    }

    pub fn three_class() -> Self {
        Self::zeros(CellClass::ALL.iter().map(|c| c.as_str()))
    }

    pub fn two_class() -> Self {
        Self::zeros(MergedClass::ALL.iter().map(|c| c.as_str()))
    }

    /// Builds a matrix from explicit rows. Class names are taken from the
    /// three-class or two-class alphabet when the size matches, otherwise
    /// they are numbered.
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(MetricsError::Shape(format!(
                "expected a non-empty square table, got {} rows",
                n
            )));
        }
        let mut m = match n {
            3 => Self::three_class(),
            2 => Self::two_class(),
            _ => Self::zeros((0..n).map(|i| format!("class{i}"))),
        };
        m.counts = rows;
        Ok(m)
    }

    pub fn with_na(mut self, na: Vec<u64>) -> Result<Self, MetricsError> {
        if na.len() != self.n_classes() {
            return Err(MetricsError::Shape(format!(
                "{} N/A counts for {} classes",
                na.len(),
                self.n_classes()
            )));
        }
        self.na = na;
        Ok(self)
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn increment(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn increment_na(&mut self, truth: usize) {
        self.na[truth] += 1;
    }

    pub fn na(&self, truth: usize) -> u64 {
        self.na[truth]
    }

    pub fn na_counts(&self) -> &[u64] {
        &self.na
    }

    pub fn na_total(&self) -> u64 {
        self.na.iter().sum()
    }

    /// Predictions for true class `i`, N/A excluded.
    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// Sum of all cells, N/A excluded.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0 && self.na_total() == 0
    }

    /// Elongated and Other rows and columns summed into one class.
    pub fn merge(&self) -> Result<Self, MetricsError> {
        if self.n_classes() != 3 {
            return Err(MetricsError::Shape(format!(
                "merging needs a three-class matrix, got {} classes",
                self.n_classes()
            )));
        }
        let mut out = Self::two_class();
        for (t, row) in self.counts.iter().enumerate() {
            let tm = CellClass::ALL[t].merge().index();
            for (p, &c) in row.iter().enumerate() {
                out.counts[tm][CellClass::ALL[p].merge().index()] += c;
            }
            out.na[tm] += self.na[t];
        }
        Ok(out)
    }

    /// Relabels classes: class `i` of `self` becomes class `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_classes();
        assert_eq!(perm.len(), n, "permutation size");
        let mut out = Self::zeros(vec![String::new(); n]);
        for i in 0..n {
            out.labels[perm[i]] = self.labels[i].clone();
            out.na[perm[i]] = self.na[i];
            for j in 0..n {
                out.counts[perm[i]][perm[j]] = self.counts[i][j];
            }
        }
        out
    }

    /// Adds another matrix cell by cell.
    pub fn accumulate(&mut self, other: &ConfusionMatrix) -> Result<(), MetricsError> {
        if other.n_classes() != self.n_classes() {
            return Err(MetricsError::Shape("class count mismatch".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.na.iter_mut().zip(&other.na) {
            *x += y;
        }
        Ok(())
    }

    /// Comma-separated table with a header row of predictions, a `total`
    /// column and an `na` column.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth");
        for l in &self.labels {
            s.push(',');
            s.push_str(l);
        }
        s.push_str(",na,total\n");
        for (i, row) in self.counts.iter().enumerate() {
            s.push_str(&self.labels[i]);
            for c in row {
                s.push_str(&format!(",{c}"));
            }
            s.push_str(&format!(",{},{}\n", self.na[i], self.row_total(i) + self.na[i]));
        }
        s
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "truth\\pred")?;
        for l in &self.labels {
            write!(f, "{:>13}", l)?;
        }
        writeln!(f, "{:>8}{:>8}", "n/a", "total")?;
        for (i, row) in self.counts.iter().enumerate() {
            write!(f, "{:<14}", self.labels[i])?;
            for c in row {
                write!(f, "{:>13}", c)?;
            }
            writeln!(f, "{:>8}{:>8}", self.na[i], self.row_total(i) + self.na[i])?;
        }
        Ok(())
    }
}

/// One cell per vote: `counts[truth][vote label]`.
pub fn build_vote_matrix<'a>(
    votes: impl IntoIterator<Item = &'a Vote>,
    truth: &Dataset,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut m = ConfusionMatrix::three_class();
    for v in votes {
        let t = truth
            .label_of(&v.item_id)
            .ok_or_else(|| MetricsError::UnknownItem(v.item_id.clone()))?;
        m.increment(t.index(), v.label.index());
    }
    Ok(m)
}

/// One cell per item. No-consensus outcomes go to the N/A column of the
/// item's true class.
pub fn build_consensus_matrix<'a>(
    results: impl IntoIterator<Item = &'a ConsensusResult>,
    truth: &Dataset,
) -> Result<ConfusionMatrix, MetricsError> {
    let mut m = ConfusionMatrix::three_class();
    let mut seen = HashSet::new();
    for r in results {
        let t = truth
            .label_of(&r.item_id)
            .ok_or_else(|| MetricsError::UnknownItem(r.item_id.clone()))?;
        if !seen.insert(&r.item_id) {
            return Err(MetricsError::DuplicateItem(r.item_id.clone()));
        }
        match r.outcome {
            Outcome::Label { class, .. } => m.increment(t.index(), class.index()),
            Outcome::NoConsensus => m.increment_na(t.index()),
        }
    }
    Ok(m)
}

pub fn merge_matrix(m: &ConfusionMatrix) -> Result<ConfusionMatrix, MetricsError> {
    m.merge()
}
