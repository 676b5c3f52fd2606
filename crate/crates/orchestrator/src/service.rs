use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use chrono::{DateTime, Duration, Utc};
use tokio::sync::{mpsc, oneshot};

use crowdcell_core::annotation::{Vote, WorkerId};

use crate::config::{OrchestratorConfig, Policy};
use crate::log::{Discard, EventSink, FileLog};
use crate::model::*;
use crate::report::{batch_report, BatchReport};
use crate::state::*;
use crate::OrchestratorError;

type Result<T> = std::result::Result<T, OrchestratorError>;

/// Source of `now` for commands.
#[derive(Debug, Clone)]
pub enum Clock {
    System,
    Manual(Arc<Mutex<DateTime<Utc>>>),
}

impl Clock {
    pub fn manual(start: DateTime<Utc>) -> Self {
        Clock::Manual(Arc::new(Mutex::new(start)))
    }

    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Manual(t) => *t.lock().unwrap(),
        }
    }

    /// No effect on the system clock.
    pub fn set(&self, to: DateTime<Utc>) {
        if let Clock::Manual(t) = self {
            *t.lock().unwrap() = to;
        }
    }

    pub fn advance(&self, by: Duration) {
        if let Clock::Manual(t) = self {
            *t.lock().unwrap() += by;
        }
    }
}

struct Msg {
    cmd: Command,
    at: Option<DateTime<Utc>>,
    reply: oneshot::Sender<Result<Reply>>,
}

/// Handle to the running service. Commands are queued to a single writer
/// thread that logs and applies their events in order; reads take a shared
/// lock on the current state.
#[derive(Clone)]
pub struct Orchestrator {
    tx: mpsc::Sender<Msg>,
    state: Arc<RwLock<State>>,
    config: Arc<OrchestratorConfig>,
    policy: Arc<Policy>,
    clock: Clock,
}

impl Orchestrator {
    /// Recovers from `config.data_dir` when set; otherwise starts empty and
    /// keeps nothing on disk.
    pub fn start(config: OrchestratorConfig, clock: Clock) -> Result<Self> {
        config.validate()?;
        let (sink, state): (Box<dyn EventSink>, State) = match &config.data_dir {
            Some(dir) => {
                let (log, state) = FileLog::open(dir, config.snapshot_every)?;
                (Box::new(log), state)
            }
            None => (Box::new(Discard), State::new()),
        };
        Ok(Self::with_sink(config, clock, state, sink))
    }

    pub fn with_sink(config: OrchestratorConfig, clock: Clock, state: State, sink: Box<dyn EventSink>) -> Self {
        let (tx, rx) = mpsc::channel(1024);
        let state = Arc::new(RwLock::new(state));
        let policy = Arc::new(config.policy());
        let writer = Writer {
            rx,
            sink,
            state: state.clone(),
            policy: policy.clone(),
            clock: clock.clone(),
        };
        std::thread::Builder::new()
            .name("orchestrator-writer".into())
            .spawn(move || writer.run())
            .expect("spawn writer thread");
        Self {
            tx,
            state,
            config: Arc::new(config),
            policy,
            clock,
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn clock(&self) -> &Clock {
        &self.clock
    }

    /// Queues a command; `at` overrides the clock.
    pub async fn execute(&self, cmd: Command, at: Option<DateTime<Utc>>) -> Result<Reply> {
        let (reply, rx) = oneshot::channel();
        self.tx
            .send(Msg { cmd, at, reply })
            .await
            .map_err(|_| OrchestratorError::Stopped)?;
        rx.await.map_err(|_| OrchestratorError::Stopped)?
    }

    pub async fn register_worker(&self, reg: Registration) -> Result<WorkerProfile> {
        match self.execute(Command::RegisterWorker(reg), None).await? {
            Reply::Worker { profile } => Ok(profile),
            r => unexpected(r),
        }
    }

    pub async fn create_batch(&self, spec: BatchSpec) -> Result<(BatchId, Vec<TaskId>)> {
        match self.execute(Command::CreateBatch(spec), None).await? {
            Reply::Batch { batch_id, tasks } => Ok((batch_id, tasks)),
            r => unexpected(r),
        }
    }

    pub async fn claim_next(&self, worker_id: impl Into<WorkerId>) -> Result<Assignment> {
        let cmd = Command::Claim {
            worker_id: worker_id.into(),
        };
        match self.execute(cmd, None).await? {
            Reply::Assignment { assignment } => Ok(assignment),
            r => unexpected(r),
        }
    }

    pub async fn submit(&self, assignment_id: AssignmentId, answers: Vec<Answer>) -> Result<Receipt> {
        let cmd = Command::Submit {
            assignment_id,
            answers,
        };
        match self.execute(cmd, None).await? {
            Reply::Receipt(r) => Ok(r),
            r => unexpected(r),
        }
    }

    pub async fn review(&self, assignment_id: AssignmentId, approve: bool) -> Result<Assignment> {
        let cmd = Command::Review {
            assignment_id,
            approve,
        };
        match self.execute(cmd, None).await? {
            Reply::Assignment { assignment } => Ok(assignment),
            r => unexpected(r),
        }
    }

    pub async fn sweep(&self, now: Option<DateTime<Utc>>) -> Result<SweepSummary> {
        match self.execute(Command::Sweep, now).await? {
            Reply::Swept(s) => Ok(s),
            r => unexpected(r),
        }
    }

    pub fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().unwrap()
    }

    pub fn snapshot(&self) -> State {
        self.read().clone()
    }

    pub fn worker(&self, id: &WorkerId) -> Result<WorkerView> {
        self.read().worker_view(id, &self.policy)
    }

    pub fn task_status(&self, id: TaskId) -> Result<TaskStatus> {
        self.read().task_status(id)
    }

    pub fn batch_votes(&self, id: BatchId) -> Result<Vec<Vote>> {
        self.read().batch_votes(id)
    }

    pub fn batch_report(&self, id: BatchId) -> Result<BatchReport> {
        batch_report(&self.read(), id, self.config.fee_rate)
    }
}

fn unexpected<T>(r: Reply) -> Result<T> {
    Err(OrchestratorError::Storage(format!("unexpected reply {r:?}")))
}

struct Writer {
    rx: mpsc::Receiver<Msg>,
    sink: Box<dyn EventSink>,
    state: Arc<RwLock<State>>,
    policy: Arc<Policy>,
    clock: Clock,
}

impl Writer {
    fn run(mut self) {
        while let Some(msg) = self.rx.blocking_recv() {
            let now = msg.at.unwrap_or_else(|| self.clock.now());
            let result = self.step(&msg.cmd, now);
            let _ = msg.reply.send(result);
        }
    }

    fn step(&mut self, cmd: &Command, now: DateTime<Utc>) -> Result<Reply> {
        let (decision, next_seq) = {
            let s = self.state.read().unwrap();
            (s.handle(cmd, now, &self.policy), s.seq + 1)
        };
        if decision.events.is_empty() {
            return decision.result;
        }
        // write ahead, then apply
        self.sink.append(next_seq, &decision.events)?;
        {
            let mut s = self.state.write().unwrap();
            for e in &decision.events {
                s.apply(e);
            }
        }
        let s = self.state.read().unwrap();
        if let Err(e) = self.sink.applied(&s) {
            tracing::warn!("snapshot failed: {e}");
        }
        decision.result
    }
}
