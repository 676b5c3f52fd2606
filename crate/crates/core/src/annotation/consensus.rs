use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{Ballot, CellClass, ItemId, MergedClass, Vote};
use super::{AnnotationError, DEFAULT_QUORUM, DEFAULT_REDUNDANCY};

/// Sorted partition of a ballot's votes among the classes, e.g. `3-1-1`.
///
/// Stored as per-class counts sorted in descending order; zero parts are
/// kept internally but never displayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgreementPattern([u32; 3]);

impl AgreementPattern {
    /// The five partitions reachable with five votes over three classes.
    pub const FIVE_VOTES: [AgreementPattern; 5] = [
        AgreementPattern([5, 0, 0]),
        AgreementPattern([4, 1, 0]),
        AgreementPattern([3, 2, 0]),
        AgreementPattern([3, 1, 1]),
        AgreementPattern([2, 2, 1]),
    ];

    pub fn from_counts(mut counts: [u32; 3]) -> Self {
        counts.sort_unstable_by(|a, b| b.cmp(a));
        Self(counts)
    }

    /// Nonzero parts, largest first.
    pub fn parts(&self) -> &[u32] {
        let len = self.0.iter().take_while(|&&c| c > 0).count();
        &self.0[..len]
    }

    pub fn max_count(&self) -> u32 {
        self.0[0]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl fmt::Display for AgreementPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts = self.parts();
        if parts.is_empty() {
            return f.write_str("0");
        }
        for (i, p) in parts.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Redundancy `k` and the number of coinciding votes needed to accept a label.
///
/// The quorum must be a strict majority so that at most one class can reach
/// it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusRule {
    k: usize,
    quorum: u32,
}

impl Default for ConsensusRule {
    fn default() -> Self {
        Self {
            k: DEFAULT_REDUNDANCY,
            quorum: DEFAULT_QUORUM,
        }
    }
}

impl ConsensusRule {
    pub fn new(k: usize, quorum: u32) -> Result<Self, AnnotationError> {
        if k == 0 {
            return Err(AnnotationError::InvalidRule("k must be positive".into()));
        }
        if quorum == 0 || quorum as usize > k {
            return Err(AnnotationError::InvalidRule(format!(
                "quorum {quorum} outside 1..={k}"
            )));
        }
        if 2 * quorum as usize <= k {
            return Err(AnnotationError::InvalidRule(format!(
                "quorum {quorum} is not a strict majority of {k}"
            )));
        }
        Ok(Self { k, quorum })
    }

    /// Simple-majority rule for `k` voters.
    pub fn majority(k: usize) -> Self {
        Self::new(k, (k / 2 + 1) as u32).expect("majority of a positive k is valid")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn quorum(&self) -> u32 {
        self.quorum
    }

    pub fn classify_pattern(&self, ballot: &Ballot) -> Result<AgreementPattern, AnnotationError> {
        self.check_complete(ballot)?;
        Ok(AgreementPattern::from_counts(ballot.counts()))
    }

    pub fn aggregate(&self, ballot: &Ballot) -> Result<ConsensusResult, AnnotationError> {
        self.check_complete(ballot)?;
        let counts = ballot.counts();
        let pattern = AgreementPattern::from_counts(counts);
        // a strict-majority quorum has at most one class reaching it
        let winner = CellClass::ALL
            .into_iter()
            .find(|c| counts[c.index()] >= self.quorum);
        let outcome = match winner {
            Some(class) => Outcome::Label {
                class,
                agreement: counts[class.index()],
            },
            None => Outcome::NoConsensus,
        };
        Ok(ConsensusResult {
            item_id: ballot.item_id().clone(),
            outcome,
            pattern,
        })
    }

    fn check_complete(&self, ballot: &Ballot) -> Result<(), AnnotationError> {
        if ballot.votes().len() < self.k {
            return Err(AnnotationError::IncompleteBallot {
                item_id: ballot.item_id().clone(),
                have: ballot.votes().len(),
                need: self.k,
            });
        }
        Ok(())
    }
}

/// Agreement pattern of a complete ballot under the majority rule for its `k`.
pub fn classify_pattern(ballot: &Ballot) -> Result<AgreementPattern, AnnotationError> {
    ConsensusRule::majority(ballot.k()).classify_pattern(ballot)
}

/// Quorum consensus of a complete ballot under the majority rule for its `k`.
pub fn aggregate(ballot: &Ballot) -> Result<ConsensusResult, AnnotationError> {
    ConsensusRule::majority(ballot.k()).aggregate(ballot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Label { class: CellClass, agreement: u32 },
    NoConsensus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MergedOutcome {
    Label { class: MergedClass, agreement: u32 },
    NoConsensus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub item_id: ItemId,
    pub outcome: Outcome,
    pub pattern: AgreementPattern,
}

impl ConsensusResult {
    pub fn label(&self) -> Option<CellClass> {
        match self.outcome {
            Outcome::Label { class, .. } => Some(class),
            Outcome::NoConsensus => None,
        }
    }

    pub fn agreement(&self) -> Option<u32> {
        match self.outcome {
            Outcome::Label { agreement, .. } => Some(agreement),
            Outcome::NoConsensus => None,
        }
    }

    pub fn is_no_consensus(&self) -> bool {
        self.outcome == Outcome::NoConsensus
    }

    /// Merges the accepted label after aggregation. Votes are never merged
    /// before aggregation, so a missing quorum stays missing.
    pub fn merged(&self) -> MergedOutcome {
        match self.outcome {
            Outcome::Label { class, agreement } => MergedOutcome::Label {
                class: class.merge(),
                agreement,
            },
            Outcome::NoConsensus => MergedOutcome::NoConsensus,
        }
    }
}

/// Count of ballots per agreement pattern.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternHistogram {
    counts: BTreeMap<AgreementPattern, usize>,
}

impl PatternHistogram {
    pub fn record(&mut self, pattern: AgreementPattern) {
        *self.counts.entry(pattern).or_default() += 1;
    }

    pub fn get(&self, pattern: AgreementPattern) -> usize {
        self.counts.get(&pattern).copied().unwrap_or(0)
    }

    /// Ballots whose largest class count equals `level`.
    pub fn with_max_count(&self, level: u32) -> usize {
        self.counts
            .iter()
            .filter(|(p, _)| p.max_count() == level)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Patterns with their counts, strongest agreement first.
    pub fn iter(&self) -> impl Iterator<Item = (AgreementPattern, usize)> + '_ {
        self.counts.iter().rev().map(|(p, n)| (*p, *n))
    }
}

impl fmt::Display for PatternHistogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (pattern, n)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{pattern}:{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncompleteBallot {
    pub item_id: ItemId,
    pub votes: usize,
    pub needed: usize,
}

/// Result of aggregating a whole vote corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusAggregation {
    /// One result per complete ballot, ordered by item id.
    pub results: Vec<ConsensusResult>,
    /// Items that did not collect `k` votes; they produce no result.
    pub incomplete: Vec<IncompleteBallot>,
    pub histogram: PatternHistogram,
}

/// Groups votes into ballots by item and aggregates every complete ballot.
pub fn aggregate_corpus<'a>(
    votes: impl IntoIterator<Item = &'a Vote>,
    rule: &ConsensusRule,
) -> Result<CorpusAggregation, AnnotationError> {
    let mut ballots: BTreeMap<ItemId, Ballot> = BTreeMap::new();
    for vote in votes {
        ballots
            .entry(vote.item_id.clone())
            .or_insert_with(|| Ballot::new(vote.item_id.clone(), rule.k()))
            .push(vote.clone())?;
    }
    let mut out = CorpusAggregation::default();
    for (item_id, ballot) in ballots {
        if !ballot.is_complete() {
            out.incomplete.push(IncompleteBallot {
                item_id,
                votes: ballot.votes().len(),
                needed: rule.k(),
            });
            continue;
        }
        let result = rule.aggregate(&ballot)?;
        out.histogram.record(result.pattern);
        out.results.push(result);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;
    use proptest::prelude::*;

    use CellClass::{Circular as C, Elongated as E, Other as O};

    fn ballot(labels: &[CellClass]) -> Ballot {
        let t = DateTime::from_timestamp(0, 0).unwrap();
        Ballot::from_votes(
            "item",
            5,
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| Vote::new("item", format!("w{i}").as_str(), l, t)),
        )
        .unwrap()
    }

    #[test]
    fn patterns() {
        assert_eq!(classify_pattern(&ballot(&[C, C, C, C, C])).unwrap().to_string(), "5");
        assert_eq!(classify_pattern(&ballot(&[C, E, O, E, E])).unwrap().to_string(), "3-1-1");
        assert_eq!(classify_pattern(&ballot(&[C, C, E, E, O])).unwrap().to_string(), "2-2-1");
    }

    #[test]
    fn aggregation_examples() {
        let r = aggregate(&ballot(&[E, E, E, O, C])).unwrap();
        assert_eq!(r.outcome, Outcome::Label { class: E, agreement: 3 });
        let r = aggregate(&ballot(&[O, O, C, C, E])).unwrap();
        assert_eq!(r.outcome, Outcome::NoConsensus);
        assert_eq!(r.merged(), MergedOutcome::NoConsensus);
    }

    #[test]
    fn incomplete_ballot_is_an_error() {
        let err = aggregate(&ballot(&[C, C, C, C])).unwrap_err();
        assert_eq!(
            err,
            AnnotationError::IncompleteBallot {
                item_id: "item".into(),
                have: 4,
                need: 5
            }
        );
        assert!(classify_pattern(&ballot(&[C])).is_err());
    }

    #[test]
    fn merging_happens_after_aggregation() {
        // re-aggregating merged votes would give a 3-2 not-circular label
        let r = aggregate(&ballot(&[C, C, E, E, O])).unwrap();
        assert!(r.is_no_consensus());
        let r = aggregate(&ballot(&[O, E, E, E, C])).unwrap();
        assert_eq!(
            r.merged(),
            MergedOutcome::Label {
                class: MergedClass::NotCircular,
                agreement: 3
            }
        );
    }

    #[test]
    fn rule_validation() {
        assert!(ConsensusRule::new(5, 3).is_ok());
        assert!(ConsensusRule::new(5, 2).is_err());
        assert!(ConsensusRule::new(5, 6).is_err());
        assert!(ConsensusRule::new(0, 1).is_err());
        assert_eq!(ConsensusRule::majority(7).quorum(), 4);
    }

    /// All 21 count vectors of five votes over three classes.
    fn all_five_vote_counts() -> Vec<[u32; 3]> {
        let mut out = Vec::new();
        for a in 0..=5u32 {
            for b in 0..=5 - a {
                out.push([a, b, 5 - a - b]);
            }
        }
        out
    }

    #[test]
    fn five_vote_patterns_are_exhaustive() {
        let all = all_five_vote_counts();
        assert_eq!(all.len(), 21);
        for counts in all {
            let labels: Vec<CellClass> = CellClass::ALL
                .iter()
                .flat_map(|&c| std::iter::repeat_n(c, counts[c.index()] as usize))
                .collect();
            let b = ballot(&labels);
            let pattern = classify_pattern(&b).unwrap();
            assert!(AgreementPattern::FIVE_VOTES.contains(&pattern), "{counts:?}");
            let result = aggregate(&b).unwrap();
            assert_eq!(result.is_no_consensus(), pattern.parts() == [2, 2, 1]);
        }
    }

    #[test]
    fn corpus_aggregation_reports_incomplete_ballots() {
        let t = DateTime::from_timestamp(0, 0).unwrap();
        let mut votes = Vec::new();
        for w in 0..5 {
            votes.push(Vote::new("a", format!("w{w}").as_str(), C, t));
        }
        for w in 0..4 {
            votes.push(Vote::new("b", format!("w{w}").as_str(), E, t));
        }
        let agg = aggregate_corpus(&votes, &ConsensusRule::default()).unwrap();
        assert_eq!(agg.results.len(), 1);
        assert_eq!(agg.incomplete.len(), 1);
        assert_eq!(agg.incomplete[0].votes, 4);
        assert_eq!(agg.histogram.to_string(), "5:1");
    }

    fn label_strategy() -> impl Strategy<Value = CellClass> {
        prop_oneof![Just(C), Just(E), Just(O)]
    }

    proptest! {
        #[test]
        fn aggregation_is_permutation_invariant(
            labels in proptest::collection::vec(label_strategy(), 5),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = labels.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate(&ballot(&labels)).unwrap();
            let b = aggregate(&ballot(&shuffled)).unwrap();
            prop_assert_eq!(a.outcome, b.outcome);
            prop_assert_eq!(a.pattern, b.pattern);
        }
    }
}
