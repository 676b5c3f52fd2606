//! Line-delimited record formats shared by the simulator, the orchestrator
//! and the command-line tools.
//!
//! Votes are comma-separated with a header line:
//!
//! ```text
//! item_id,worker_id,label,submitted_at
//! cell_0001,w17,circular,2024-03-01T10:15:00Z
//! ```
//!
//! `label` is one of `circular`, `elongated`, `other`; `submitted_at` is an
//! ISO-8601 UTC timestamp. Consensus records use
//! `item_id,outcome,label,agreement,pattern` where `outcome` is `label` or
//! `no_consensus` and the label columns are empty for the latter.

use std::collections::HashSet;
use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::annotation::{CellClass, ConsensusResult, ItemId, Outcome, Vote, WorkerId};

pub const VOTE_HEADER: [&str; 4] = ["item_id", "worker_id", "label", "submitted_at"];

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: worker {worker_id} voted twice on item {item_id}")]
    DuplicateVote {
        line: u64,
        item_id: ItemId,
        worker_id: WorkerId,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct VoteRow {
    item_id: String,
    worker_id: String,
    label: String,
    submitted_at: String,
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn write_votes<'a, W: Write>(
    writer: W,
    votes: impl IntoIterator<Item = &'a Vote>,
) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(VOTE_HEADER)?;
    for v in votes {
        w.write_record([
            v.item_id.as_str(),
            v.worker_id.as_str(),
            v.label.as_str(),
            &format_timestamp(&v.submitted_at),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn votes_to_string<'a>(votes: impl IntoIterator<Item = &'a Vote>) -> String {
    let mut buf = Vec::new();
    write_votes(&mut buf, votes).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("records are utf-8")
}

/// Reads a vote stream. Labels outside the three-class alphabet and repeated
/// `(worker, item)` pairs are rejected with the offending line number.
pub fn read_votes<R: Read>(reader: R) -> Result<Vec<Vote>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| RecordError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: VoteRow = record
            .deserialize(Some(&headers))
            .map_err(|e| RecordError::Parse {
                line,
                message: e.to_string(),
            })?;
        let label: CellClass = row.label.parse().map_err(|e| RecordError::Parse {
            line,
            message: format!("{e}"),
        })?;
        let submitted_at = DateTime::parse_from_rfc3339(&row.submitted_at)
            .map_err(|e| RecordError::Parse {
                line,
                message: format!("bad timestamp {:?}: {e}", row.submitted_at),
            })?
            .with_timezone(&Utc);
        let vote = Vote::new(row.item_id, row.worker_id, label, submitted_at);
        if !seen.insert((vote.worker_id.clone(), vote.item_id.clone())) {
            return Err(RecordError::DuplicateVote {
                line,
                item_id: vote.item_id,
                worker_id: vote.worker_id,
            });
        }
        out.push(vote);
    }
    Ok(out)
}

pub fn write_consensus<'a, W: Write>(
    writer: W,
    results: impl IntoIterator<Item = &'a ConsensusResult>,
) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["item_id", "outcome", "label", "agreement", "pattern"])?;
    for r in results {
        let pattern = r.pattern.to_string();
        match r.outcome {
            Outcome::Label { class, agreement } => w.write_record([
                r.item_id.as_str(),
                "label",
                class.as_str(),
                &agreement.to_string(),
                &pattern,
            ])?,
            Outcome::NoConsensus => {
                w.write_record([r.item_id.as_str(), "no_consensus", "", "", &pattern])?
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_stream_is_header_only() {
        let s = votes_to_string(&[]);
        assert_eq!(s, "item_id,worker_id,label,submitted_at\n");
        assert!(read_votes(s.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn rejects_unknown_label_with_line() {
        let input = "item_id,worker_id,label,submitted_at\n\
                     a,w1,circular,2024-01-01T00:00:00Z\n\
                     b,w1,sickle,2024-01-01T00:00:00Z\n";
        match read_votes(input.as_bytes()) {
            Err(RecordError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("sickle"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_pair() {
        let input = "item_id,worker_id,label,submitted_at\n\
                     a,w1,circular,2024-01-01T00:00:00Z\n\
                     a,w1,other,2024-01-01T00:01:00Z\n";
        assert!(matches!(
            read_votes(input.as_bytes()),
            Err(RecordError::DuplicateVote { line: 3, .. })
        ));
    }

    #[test]
    fn rejects_bad_timestamp() {
        let input = "item_id,worker_id,label,submitted_at\na,w1,circular,yesterday\n";
        assert!(matches!(
            read_votes(input.as_bytes()),
            Err(RecordError::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn vote_records_round_trip(
            rows in proptest::collection::vec((0u32..50, 0u32..20, 0usize..3, 0i64..2_000_000_000), 0..40)
        ) {
            let mut seen = HashSet::new();
            let votes: Vec<Vote> = rows
                .into_iter()
                .filter(|(i, w, _, _)| seen.insert((*i, *w)))
                .map(|(i, w, l, t)| Vote::new(
                    format!("item-{i}").as_str(),
                    format!("w{w}").as_str(),
                    CellClass::from_index(l).unwrap(),
                    DateTime::from_timestamp(t, 0).unwrap(),
                ))
                .collect();
            let text = votes_to_string(&votes);
            prop_assert_eq!(read_votes(text.as_bytes()).unwrap(), votes);
        }
    }
}
