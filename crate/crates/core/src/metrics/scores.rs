//! Scalar metrics over a [`ConfusionMatrix`].
//!
//! Every function returns `None` when the value is undefined (empty input,
//! zero denominator). Under [`NaPolicy::CountAsError`] the N/A counts act as
//! an extra prediction column that is never correct; under
//! [`NaPolicy::Exclude`] they are ignored.

use serde::{Deserialize, Serialize};

use super::ConfusionMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    #[default]
    Exclude,
    CountAsError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Macro,
    Weighted,
}

/// Counts with the N/A column folded in or dropped.
struct View<'a> {
    m: &'a ConfusionMatrix,
    na: bool,
}

impl<'a> View<'a> {
    fn new(m: &'a ConfusionMatrix, policy: NaPolicy) -> Self {
        Self {
            m,
            na: policy == NaPolicy::CountAsError,
        }
    }

    fn n(&self) -> usize {
        self.m.n_classes()
    }

    fn tp(&self, i: usize) -> u64 {
        self.m.get(i, i)
    }

    fn row(&self, i: usize) -> u64 {
        self.m.row_total(i) + if self.na { self.m.na(i) } else { 0 }
    }

    fn col(&self, j: usize) -> u64 {
        self.m.col_total(j)
    }

    fn na_col(&self) -> u64 {
        if self.na {
            self.m.na_total()
        } else {
            0
        }
    }

    fn total(&self) -> u64 {
        self.m.total() + self.na_col()
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Recall per true class: `counts[i][i]` over the row total, with the N/A
/// count added to the denominator under `CountAsError`.
pub fn per_class_accuracy(m: &ConfusionMatrix, policy: NaPolicy) -> Vec<Option<f64>> {
    let v = View::new(m, policy);
    (0..v.n()).map(|i| ratio(v.tp(i), v.row(i))).collect()
}

pub fn overall_accuracy(m: &ConfusionMatrix, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    ratio(m.trace(), v.total())
}

/// Share of decisions that do not confuse a circular cell with a deformed
/// one: correct cells plus confusions among the deformed classes, over
/// everything. Class 0 is the circular class.
pub fn sds_score(m: &ConfusionMatrix) -> Option<f64> {
    sds_with(m, NaPolicy::Exclude)
}

pub fn sds_with(m: &ConfusionMatrix, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    let n = v.n();
    let mut good = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j || (i != 0 && j != 0) {
                good += m.get(i, j);
            }
        }
    }
    ratio(good, v.total())
}

fn f1(tp: u64, row: u64, col: u64) -> f64 {
    let p = if col > 0 { tp as f64 / col as f64 } else { 0.0 };
    let r = tp as f64 / row as f64;
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Per-class F1 averaged over classes with non-zero support, either
/// uniformly or weighted by support.
pub fn f_measure(m: &ConfusionMatrix, averaging: Averaging) -> Option<f64> {
    f_measure_with(m, averaging, NaPolicy::Exclude)
}

pub fn f_measure_with(m: &ConfusionMatrix, averaging: Averaging, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    let scored: Vec<(f64, u64)> = (0..v.n())
        .filter(|&i| v.row(i) > 0)
        .map(|i| (f1(v.tp(i), v.row(i), v.col(i)), v.row(i)))
        .collect();
    match averaging {
        Averaging::Macro => mean(scored.iter().map(|(f, _)| *f)),
        Averaging::Weighted => {
            let support: u64 = scored.iter().map(|(_, s)| s).sum();
            (support > 0).then(|| {
                scored.iter().map(|(f, s)| f * *s as f64).sum::<f64>() / support as f64
            })
        }
    }
}

/// Class balance accuracy: mean over classes of `tp / max(row, column)`.
/// Classes with an empty row and an empty column are left out.
pub fn cba(m: &ConfusionMatrix) -> Option<f64> {
    cba_with(m, NaPolicy::Exclude)
}

pub fn cba_with(m: &ConfusionMatrix, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    mean((0..v.n()).filter_map(|i| ratio(v.tp(i), v.row(i).max(v.col(i)))))
}

/// Mean per-class recall over classes with non-zero support.
pub fn balanced_accuracy(m: &ConfusionMatrix) -> Option<f64> {
    balanced_accuracy_with(m, NaPolicy::Exclude)
}

pub fn balanced_accuracy_with(m: &ConfusionMatrix, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    mean((0..v.n()).filter_map(|i| ratio(v.tp(i), v.row(i))))
}

/// Multi-class Matthews correlation (Gorodkin's R_K). Zero when either
/// marginal is degenerate, `None` only for an empty matrix.
pub fn mcc(m: &ConfusionMatrix) -> Option<f64> {
    mcc_with(m, NaPolicy::Exclude)
}

pub fn mcc_with(m: &ConfusionMatrix, policy: NaPolicy) -> Option<f64> {
    let v = View::new(m, policy);
    let s = v.total() as i128;
    if s == 0 {
        return None;
    }
    let c = m.trace() as i128;
    let mut pt = 0i128;
    let mut pp = 0i128;
    let mut tt = 0i128;
    for k in 0..v.n() {
        let p = v.col(k) as i128;
        let t = v.row(k) as i128;
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    // the N/A column has no true-class row
    let na = v.na_col() as i128;
    pp += na * na;
    let num = c * s - pt;
    let dx = s * s - pp;
    let dy = s * s - tt;
    if dx == 0 || dy == 0 {
        return Some(0.0);
    }
    Some(((num as f64) / ((dx as f64).sqrt() * (dy as f64).sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1() -> ConfusionMatrix {
        ConfusionMatrix::from_rows(vec![
            vec![2676, 58, 351],
            vec![48, 614, 243],
            vec![69, 28, 153],
        ])
        .unwrap()
    }

    fn close(a: Option<f64>, b: f64, tol: f64) -> bool {
        a.is_some_and(|a| (a - b).abs() < tol)
    }

    #[test]
    fn per_vote_accuracies() {
        let acc = per_class_accuracy(&table1(), NaPolicy::Exclude);
        for (a, e) in acc.iter().zip([2676.0 / 3085.0, 614.0 / 905.0, 153.0 / 250.0]) {
            assert!(close(*a, e, 1e-15));
        }
        assert!(close(acc[0], 0.8674, 5e-5));
        assert!(close(acc[1], 0.6785, 5e-5));
        assert!(close(acc[2], 0.6120, 5e-5));
    }

    #[test]
    fn consensus_accuracy_with_na() {
        let m = ConfusionMatrix::from_rows(vec![vec![566, 1, 37], vec![0, 128, 42], vec![18, 0, 32]])
            .unwrap()
            .with_na(vec![13, 11, 0])
            .unwrap();
        let acc = per_class_accuracy(&m, NaPolicy::CountAsError);
        assert!(close(acc[0], 0.9173, 5e-5));
        assert!(close(acc[1], 0.7072, 5e-5));
        assert!(close(acc[2], 0.6400, 5e-5));
        let excl = per_class_accuracy(&m, NaPolicy::Exclude);
        assert!(close(excl[0], 566.0 / 604.0, 1e-15));
    }

    #[test]
    fn sds_on_reference_matrix() {
        let m = table1();
        assert!(close(sds_score(&m), 3714.0 / 4240.0, 1e-15));
        assert!(close(sds_score(&m), 0.8759, 1e-4));
        let two = m.merge().unwrap();
        assert!(close(sds_score(&two), 0.8759, 1e-4));
        assert_eq!(sds_score(&two), overall_accuracy(&two, NaPolicy::Exclude));
    }

    #[test]
    fn reference_matrix_pooled_values() {
        let m = table1();
        assert!(close(f_measure(&m, Averaging::Macro), 0.6608, 5e-5));
        assert!(close(f_measure(&m, Averaging::Weighted), 0.8439, 5e-5));
        assert!(close(cba(&m), 0.5836, 5e-5));
        assert!(close(balanced_accuracy(&m), 0.7193, 5e-5));
        assert!(close(mcc(&m), 0.6206, 5e-5));
        let two = m.merge().unwrap();
        assert!(close(balanced_accuracy(&two), 0.8831, 5e-5));
        assert!(close(mcc(&two), 0.7194, 5e-5));
    }

    #[test]
    fn trivial_cases() {
        let diag = ConfusionMatrix::from_rows(vec![vec![5, 0, 0], vec![0, 3, 0], vec![0, 0, 1]]).unwrap();
        for v in [
            sds_score(&diag),
            f_measure(&diag, Averaging::Macro),
            f_measure(&diag, Averaging::Weighted),
            cba(&diag),
            mcc(&diag),
            overall_accuracy(&diag, NaPolicy::Exclude),
        ] {
            assert_eq!(v, Some(1.0));
        }
        let uniform = ConfusionMatrix::from_rows(vec![vec![4; 3]; 3]).unwrap();
        assert_eq!(mcc(&uniform), Some(0.0));
        let single = ConfusionMatrix::from_rows(vec![vec![7]]).unwrap();
        assert_eq!(cba(&single), Some(1.0));
        assert_eq!(mcc(&single), Some(0.0));
        let empty = ConfusionMatrix::three_class();
        assert_eq!(sds_score(&empty), None);
        assert_eq!(mcc(&empty), None);
        assert_eq!(cba(&empty), None);
        assert_eq!(f_measure(&empty, Averaging::Macro), None);
        assert_eq!(per_class_accuracy(&empty, NaPolicy::Exclude), vec![None; 3]);
    }

    #[test]
    fn small_binary_f_measure() {
        // rows: positive (10, 0), negative (5, 5)
        let m = ConfusionMatrix::from_rows(vec![vec![10, 0], vec![5, 5]]).unwrap();
        let f_pos = 2.0 * (10.0 / 15.0) * 1.0 / (10.0 / 15.0 + 1.0);
        let f_neg = 2.0 * 1.0 * 0.5 / 1.5;
        assert!(close(f_measure(&m, Averaging::Macro), (f_pos + f_neg) / 2.0, 1e-15));
    }

    #[test]
    fn zero_support_class_left_out_of_macro_f() {
        let m = ConfusionMatrix::from_rows(vec![vec![4, 1, 0], vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        let f0 = 2.0 * 1.0 * 0.8 / 1.8;
        assert!(close(f_measure(&m, Averaging::Macro), f0, 1e-15));
    }

    #[test]
    fn na_column_lowers_scores() {
        let m = ConfusionMatrix::from_rows(vec![vec![8, 2], vec![1, 9]])
            .unwrap()
            .with_na(vec![2, 0])
            .unwrap();
        assert_eq!(overall_accuracy(&m, NaPolicy::CountAsError), Some(17.0 / 22.0));
        assert_eq!(sds_with(&m, NaPolicy::CountAsError), Some(17.0 / 22.0));
        assert!(mcc_with(&m, NaPolicy::CountAsError).unwrap() < mcc(&m).unwrap());
    }
}
