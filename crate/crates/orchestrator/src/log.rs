//! Append-only event log (`events.jsonl`) with periodic snapshots
//! (`snapshot.json`). Recovery loads the snapshot and replays the events
//! logged after it.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::state::{Event, State};
use crate::OrchestratorError;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub event: Event,
}

pub trait EventSink: Send {
    /// Persists events that will be applied next; `first_seq` is the
    /// sequence number of the first one.
    fn append(&mut self, first_seq: u64, events: &[Event]) -> Result<(), OrchestratorError>;

    /// Called after the events are applied.
    fn applied(&mut self, _state: &State) -> Result<(), OrchestratorError> {
        Ok(())
    }
}

/// Keeps every record in memory.
#[derive(Debug, Default)]
pub struct MemoryLog {
    pub records: Vec<Record>,
}

impl EventSink for MemoryLog {
    fn append(&mut self, first_seq: u64, events: &[Event]) -> Result<(), OrchestratorError> {
        for (i, e) in events.iter().enumerate() {
            self.records.push(Record {
                seq: first_seq + i as u64,
                event: e.clone(),
            });
        }
        Ok(())
    }
}

/// Keeps nothing.
#[derive(Debug, Default)]
pub struct Discard;

impl EventSink for Discard {
    fn append(&mut self, _: u64, _: &[Event]) -> Result<(), OrchestratorError> {
        Ok(())
    }
}

pub struct FileLog {
    dir: PathBuf,
    writer: BufWriter<File>,
    snapshot_every: u64,
    last_snapshot: u64,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    seq: u64,
    state: &'a State,
}

#[derive(Deserialize)]
struct Snapshot {
    seq: u64,
    state: State,
}

impl FileLog {
    /// Opens (creating if needed) the log in `dir` and rebuilds the state.
    pub fn open(dir: &Path, snapshot_every: u64) -> Result<(Self, State), OrchestratorError> {
        std::fs::create_dir_all(dir)?;
        let mut state = match std::fs::read(dir.join(SNAPSHOT_FILE)) {
            Ok(bytes) => {
                let snap: Snapshot = serde_json::from_slice(&bytes)
                    .map_err(|e| OrchestratorError::Storage(format!("snapshot: {e}")))?;
                debug_assert_eq!(snap.seq, snap.state.seq);
                snap.state
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => State::new(),
            Err(e) => return Err(e.into()),
        };
        let last_snapshot = state.seq;
        let path = dir.join(EVENTS_FILE);
        let valid_len = if path.exists() {
            replay_tail(&path, &mut state)?
        } else {
            0
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        // drop a torn final line left by a crash
        if file.metadata()?.len() > valid_len {
            file.set_len(valid_len)?;
        }
        Ok((
            Self {
                dir: dir.to_path_buf(),
                writer: BufWriter::new(file),
                snapshot_every,
                last_snapshot,
            },
            state,
        ))
    }

    pub fn write_snapshot(&mut self, state: &State) -> Result<(), OrchestratorError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer(
            &mut tmp,
            &SnapshotRef {
                seq: state.seq,
                state,
            },
        )
        .map_err(|e| OrchestratorError::Storage(e.to_string()))?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(SNAPSHOT_FILE))
            .map_err(|e| OrchestratorError::Storage(e.to_string()))?;
        self.last_snapshot = state.seq;
        Ok(())
    }
}

/// Applies logged records newer than the state; returns the byte length of
/// the well-formed prefix.
fn replay_tail(path: &Path, state: &mut State) -> Result<u64, OrchestratorError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    let mut offset = 0u64;
    let mut lineno = 0u64;
    loop {
        line.clear();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            // torn write
            break;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| OrchestratorError::Storage(format!("{}:{lineno}: {e}", path.display())))?;
        if rec.seq > state.seq {
            if rec.seq != state.seq + 1 {
                return Err(OrchestratorError::Storage(format!(
                    "{}:{lineno}: expected event {} but found {}",
                    path.display(),
                    state.seq + 1,
                    rec.seq
                )));
            }
            state.apply(&rec.event);
        }
        offset += n as u64;
    }
    Ok(offset)
}

/// Reads every record of an events file.
pub fn read_records(path: &Path) -> Result<Vec<Record>, OrchestratorError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| OrchestratorError::Storage(format!("line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

impl EventSink for FileLog {
    fn append(&mut self, first_seq: u64, events: &[Event]) -> Result<(), OrchestratorError> {
        for (i, event) in events.iter().enumerate() {
            let rec = Record {
                seq: first_seq + i as u64,
                event: event.clone(),
            };
            serde_json::to_writer(&mut self.writer, &rec)
                .map_err(|e| OrchestratorError::Storage(e.to_string()))?;
            self.writer.write_all(b"\n")?;
        }
        self.writer.flush()?;
        Ok(())
    }

    fn applied(&mut self, state: &State) -> Result<(), OrchestratorError> {
        if state.seq >= self.last_snapshot + self.snapshot_every {
            self.write_snapshot(state)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Policy;
    use crate::state::{BatchSpec, Command, Registration};
    use chrono::DateTime;

    fn drive(log: &mut dyn EventSink, state: &mut State, cmds: &[Command]) {
        let now = DateTime::from_timestamp(1_700_000_000, 0).unwrap();
        for cmd in cmds {
            let d = state.handle(cmd, now, &Policy::default());
            log.append(state.seq + 1, &d.events).unwrap();
            for e in &d.events {
                state.apply(e);
            }
            log.applied(state).unwrap();
        }
    }

    fn commands() -> Vec<Command> {
        let mut cmds = vec![Command::CreateBatch(BatchSpec::from_ids(["a", "b", "c"]))];
        for w in 0..4 {
            cmds.push(Command::RegisterWorker(Registration::new(format!("w{w}"), true)));
            cmds.push(Command::Claim {
                worker_id: format!("w{w}").into(),
            });
        }
        cmds
    }

    #[test]
    fn recover_from_snapshot_and_tail() {
        let dir = tempfile::tempdir().unwrap();
        let (mut log, mut state) = FileLog::open(dir.path(), 3).unwrap();
        drive(&mut log, &mut state, &commands());
        assert!(dir.path().join(SNAPSHOT_FILE).exists());
        drop(log);
        let (_, recovered) = FileLog::open(dir.path(), 3).unwrap();
        assert_eq!(recovered, state);
        let records = read_records(&dir.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(records.len() as u64, state.seq);
        assert_eq!(State::replay(records.iter().map(|r| &r.event)), state);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let (mut log, mut state) = FileLog::open(dir.path(), 1000).unwrap();
        drive(&mut log, &mut state, &commands());
        drop(log);
        let path = dir.path().join(EVENTS_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"seq\":99,\"ev").unwrap();
        drop(f);
        let (mut log, mut recovered) = FileLog::open(dir.path(), 1000).unwrap();
        assert_eq!(recovered, state);
        drive(&mut log, &mut recovered, &[Command::Claim { worker_id: "w0".into() }]);
        drop(log);
        assert_eq!(read_records(&path).unwrap().len() as u64, recovered.seq);
    }

    #[test]
    fn corrupt_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(EVENTS_FILE), "not json\n").unwrap();
        assert!(matches!(FileLog::open(dir.path(), 10), Err(OrchestratorError::Storage(_))));
    }

    #[test]
    fn memory_log_numbers_records() {
        let mut log = MemoryLog::default();
        let mut state = State::new();
        drive(&mut log, &mut state, &commands());
        let seqs: Vec<u64> = log.records.iter().map(|r| r.seq).collect();
        assert_eq!(seqs, (1..=state.seq).collect::<Vec<_>>());
    }
}
