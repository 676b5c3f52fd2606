use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crowdcell_core::annotation::{
    aggregate_corpus, Ballot, ConsensusResult, ConsensusRule, ItemId, Vote, WorkerId,
};

use crate::config::Policy;
use crate::model::*;
use crate::OrchestratorError;

type Result<T> = std::result::Result<T, OrchestratorError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub worker_id: WorkerId,
    #[serde(default)]
    pub is_master: bool,
    /// Historical approval rate; stored as counts out of 1000.
    #[serde(default)]
    pub approval_rate: Option<f64>,
    #[serde(default)]
    pub prior_approved: Option<u64>,
    #[serde(default)]
    pub prior_rejected: Option<u64>,
}

impl Registration {
    pub fn new(worker_id: impl Into<WorkerId>, is_master: bool) -> Self {
        Self {
            worker_id: worker_id.into(),
            is_master,
            approval_rate: None,
            prior_approved: None,
            prior_rejected: None,
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.approval_rate = Some(rate);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub items: Vec<BatchItem>,
    #[serde(default)]
    pub pairing: Pairing,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub reward_usd: Option<f64>,
    #[serde(default)]
    pub lifetime_secs: Option<i64>,
}

impl BatchSpec {
    pub fn from_ids<I: Into<ItemId>>(ids: impl IntoIterator<Item = I>) -> Self {
        Self {
            items: ids
                .into_iter()
                .map(|id| BatchItem {
                    item_id: id.into(),
                    image: None,
                    truth: None,
                })
                .collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    RegisterWorker(Registration),
    CreateBatch(BatchSpec),
    Claim { worker_id: WorkerId },
    Submit { assignment_id: AssignmentId, answers: Vec<Answer> },
    Review { assignment_id: AssignmentId, approve: bool },
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    WorkerRegistered { profile: WorkerProfile },
    BatchCreated { batch: Batch, tasks: Vec<Task> },
    AssignmentClaimed { assignment: Assignment },
    AssignmentSubmitted { assignment_id: AssignmentId, answers: Vec<Answer>, at: DateTime<Utc> },
    TaskCompleted { task_id: TaskId, at: DateTime<Utc> },
    AssignmentExpired { assignment_id: AssignmentId, at: DateTime<Utc> },
    AssignmentApproved { assignment_id: AssignmentId, entry: LedgerEntry },
    AssignmentRejected { assignment_id: AssignmentId, at: DateTime<Utc> },
    TaskExpired { task_id: TaskId, at: DateTime<Utc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub assignment_id: AssignmentId,
    pub task_id: TaskId,
    pub votes_recorded: usize,
    pub task_complete: bool,
    /// Same answers sent again; nothing changed.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub expired_assignments: Vec<AssignmentId>,
    pub approved: Vec<AssignmentId>,
    pub expired_tasks: Vec<TaskId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Worker { profile: WorkerProfile },
    Batch { batch_id: BatchId, tasks: Vec<TaskId> },
    Assignment { assignment: Assignment },
    Receipt(Receipt),
    Swept(SweepSummary),
}

/// What a command decided: events to log and apply, and the caller's answer.
/// A rejected submission past its deadline carries both an event and an
/// error.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub events: Vec<Event>,
    pub result: Result<Reply>,
}

impl Decision {
    fn ok(events: Vec<Event>, reply: Reply) -> Self {
        Self {
            events,
            result: Ok(reply),
        }
    }

    fn err(e: OrchestratorError) -> Self {
        Self {
            events: Vec::new(),
            result: Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ItemOutcome {
    Pending,
    Consensus { result: ConsensusResult },
    /// The task expired before collecting `k` votes.
    NoConsensusByExpiry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemStatus {
    pub item_id: ItemId,
    pub votes: usize,
    pub outcome: ItemOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub task: Task,
    pub active_assignments: usize,
    pub submitted_assignments: usize,
    pub votes: Vec<Vote>,
    pub items: Vec<ItemStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerView {
    pub profile: WorkerProfile,
    pub approval_rate: f64,
    pub qualified: bool,
    /// Rewards for submitted work not yet approved.
    pub pending: Micros,
    pub pending_usd: f64,
    pub balance_usd: f64,
}

/// Everything the service knows. Only [`State::apply`] changes it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    /// Events applied so far.
    pub seq: u64,
    pub workers: BTreeMap<WorkerId, WorkerProfile>,
    pub batches: BTreeMap<BatchId, Batch>,
    pub tasks: BTreeMap<TaskId, Task>,
    pub assignments: BTreeMap<AssignmentId, Assignment>,
    pub ledger: Vec<LedgerEntry>,
    /// Task of every item ever batched.
    pub items: BTreeMap<ItemId, TaskId>,
    /// Open tasks with a free slot.
    pub available: BTreeSet<TaskId>,
    /// Tasks each worker has ever claimed.
    pub worker_tasks: BTreeMap<WorkerId, BTreeSet<TaskId>>,
    pub next_batch: u64,
    pub next_task: u64,
    pub next_assignment: u64,
}

pub fn is_qualified(profile: &WorkerProfile, policy: &Policy) -> bool {
    (profile.is_master || !policy.require_master) && profile.approval_rate() > policy.approval_threshold
}

impl State {
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds an event list into a fresh state.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Self {
        let mut s = Self::new();
        for e in events {
            s.apply(e);
        }
        s
    }

    pub fn handle(&self, cmd: &Command, now: DateTime<Utc>, policy: &Policy) -> Decision {
        let r = match cmd {
            Command::RegisterWorker(reg) => self.register(reg, now),
            Command::CreateBatch(spec) => self.create_batch(spec, now, policy),
            Command::Claim { worker_id } => self.claim(worker_id, now, policy),
            Command::Submit {
                assignment_id,
                answers,
            } => return self.submit(*assignment_id, answers, now),
            Command::Review {
                assignment_id,
                approve,
            } => self.review(*assignment_id, *approve, now),
            Command::Sweep => Ok(self.sweep(now, policy)),
        };
        r.unwrap_or_else(Decision::err)
    }

    fn register(&self, reg: &Registration, now: DateTime<Utc>) -> Result<Decision> {
        if reg.worker_id.as_str().trim().is_empty() {
            return Err(OrchestratorError::InvalidAnswers("empty worker id".into()));
        }
        if self.workers.contains_key(&reg.worker_id) {
            return Err(OrchestratorError::WorkerExists(reg.worker_id.clone()));
        }
        let (prior_approved, prior_rejected) = match (reg.approval_rate, reg.prior_approved, reg.prior_rejected) {
            (Some(rate), None, None) => {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(OrchestratorError::InvalidAnswers(format!("approval rate {rate}")));
                }
                let a = (rate * 1000.0).round() as u64;
                (a, 1000 - a)
            }
            (None, a, r) => (a.unwrap_or(0), r.unwrap_or(0)),
            _ => {
                return Err(OrchestratorError::InvalidAnswers(
                    "give an approval rate or prior counts, not both".into(),
                ))
            }
        };
        let profile = WorkerProfile {
            worker_id: reg.worker_id.clone(),
            is_master: reg.is_master,
            prior_approved,
            prior_rejected,
            approved_count: 0,
            rejected_count: 0,
            submitted_count: 0,
            balance: 0,
            registered_at: now,
        };
        Ok(Decision::ok(
            vec![Event::WorkerRegistered {
                profile: profile.clone(),
            }],
            Reply::Worker { profile },
        ))
    }

    fn create_batch(&self, spec: &BatchSpec, now: DateTime<Utc>, policy: &Policy) -> Result<Decision> {
        if spec.items.is_empty() {
            return Err(OrchestratorError::EmptyBatch);
        }
        let k = spec.k.unwrap_or(policy.k);
        if k == 0 {
            return Err(OrchestratorError::Config("k must be positive".into()));
        }
        let reward = match spec.reward_usd {
            Some(r) if !(r > 0.0 && r.is_finite()) => {
                return Err(OrchestratorError::Config("reward must be positive".into()))
            }
            Some(r) => micros(r),
            None => policy.reward,
        };
        let lifetime = match spec.lifetime_secs {
            Some(s) if s <= 0 => return Err(OrchestratorError::Config("lifetime must be positive".into())),
            Some(s) => Duration::seconds(s),
            None => policy.task_lifetime,
        };
        let mut seen = BTreeSet::new();
        for item in &spec.items {
            if item.item_id.as_str().is_empty() {
                return Err(OrchestratorError::InvalidAnswers("empty item id".into()));
            }
            if !seen.insert(&item.item_id) || self.items.contains_key(&item.item_id) {
                return Err(OrchestratorError::DuplicateItem(item.item_id.clone()));
            }
        }
        let mut order: Vec<&ItemId> = spec.items.iter().map(|i| &i.item_id).collect();
        if let Pairing::Shuffled(seed) = spec.pairing {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        let batch_id = BatchId(self.next_batch);
        let tasks: Vec<Task> = order
            .chunks(2)
            .enumerate()
            .map(|(i, pair)| Task {
                task_id: TaskId(self.next_task + i as u64),
                batch_id,
                items: pair.iter().map(|&id| id.clone()).collect(),
                k,
                reward,
                created_at: now,
                expires_at: now + lifetime,
                state: TaskState::Open,
                assignments: Vec::new(),
            })
            .collect();
        let batch = Batch {
            batch_id,
            created_at: now,
            items: spec.items.clone(),
            tasks: tasks.iter().map(|t| t.task_id).collect(),
        };
        let reply = Reply::Batch {
            batch_id,
            tasks: batch.tasks.clone(),
        };
        Ok(Decision::ok(vec![Event::BatchCreated { batch, tasks }], reply))
    }

    fn claim(&self, worker_id: &WorkerId, now: DateTime<Utc>, policy: &Policy) -> Result<Decision> {
        let profile = self
            .workers
            .get(worker_id)
            .ok_or_else(|| OrchestratorError::UnknownWorker(worker_id.clone()))?;
        if !is_qualified(profile, policy) {
            return Err(OrchestratorError::NotQualified(worker_id.clone()));
        }
        let touched = self.worker_tasks.get(worker_id);
        let task = self
            .available
            .iter()
            .map(|id| &self.tasks[id])
            .find(|t| now <= t.expires_at && !touched.is_some_and(|s| s.contains(&t.task_id)))
            .ok_or(OrchestratorError::NoneAvailable)?;
        let assignment = Assignment {
            assignment_id: AssignmentId(self.next_assignment),
            task_id: task.task_id,
            worker_id: worker_id.clone(),
            claimed_at: now,
            deadline: now + policy.claim_timeout,
            state: AssignmentState::Claimed,
            answers: Vec::new(),
            submitted_at: None,
            resolved_at: None,
        };
        Ok(Decision::ok(
            vec![Event::AssignmentClaimed {
                assignment: assignment.clone(),
            }],
            Reply::Assignment { assignment },
        ))
    }

    fn submit(&self, id: AssignmentId, answers: &[Answer], now: DateTime<Utc>) -> Decision {
        let Some(a) = self.assignments.get(&id) else {
            return Decision::err(OrchestratorError::UnknownAssignment(id));
        };
        let task = &self.tasks[&a.task_id];
        if a.state != AssignmentState::Claimed {
            if a.state.has_answers() && same_answers(&a.answers, answers) {
                return Decision::ok(
                    Vec::new(),
                    Reply::Receipt(Receipt {
                        assignment_id: id,
                        task_id: a.task_id,
                        votes_recorded: 0,
                        task_complete: task.state == TaskState::Complete,
                        duplicate: true,
                    }),
                );
            }
            return Decision::err(OrchestratorError::WrongState { id, state: a.state });
        }
        if now > a.deadline {
            return Decision {
                events: vec![Event::AssignmentExpired {
                    assignment_id: id,
                    at: now,
                }],
                result: Err(OrchestratorError::DeadlineExceeded(id)),
            };
        }
        if let Err(e) = check_answers(&task.items, answers) {
            return Decision::err(e);
        }
        // answers stored in task item order
        let ordered: Vec<Answer> = task
            .items
            .iter()
            .map(|item| answers.iter().find(|x| &x.item_id == item).cloned().unwrap())
            .collect();
        let submitted = self.count(task, |s| s.has_answers()) + 1;
        let mut events = vec![Event::AssignmentSubmitted {
            assignment_id: id,
            answers: ordered.clone(),
            at: now,
        }];
        let complete = submitted >= task.k;
        if complete {
            events.push(Event::TaskCompleted {
                task_id: task.task_id,
                at: now,
            });
        }
        Decision::ok(
            events,
            Reply::Receipt(Receipt {
                assignment_id: id,
                task_id: task.task_id,
                votes_recorded: ordered.len(),
                task_complete: complete,
                duplicate: false,
            }),
        )
    }

    fn review(&self, id: AssignmentId, approve: bool, now: DateTime<Utc>) -> Result<Decision> {
        let a = self
            .assignments
            .get(&id)
            .ok_or(OrchestratorError::UnknownAssignment(id))?;
        if a.state != AssignmentState::Submitted {
            return Err(OrchestratorError::WrongState { id, state: a.state });
        }
        let event = if approve {
            self.approval(a, now)
        } else {
            Event::AssignmentRejected {
                assignment_id: id,
                at: now,
            }
        };
        let mut after = a.clone();
        after.state = if approve {
            AssignmentState::Approved
        } else {
            AssignmentState::Rejected
        };
        after.resolved_at = Some(now);
        Ok(Decision::ok(vec![event], Reply::Assignment { assignment: after }))
    }

    fn approval(&self, a: &Assignment, now: DateTime<Utc>) -> Event {
        Event::AssignmentApproved {
            assignment_id: a.assignment_id,
            entry: LedgerEntry {
                worker_id: a.worker_id.clone(),
                assignment_id: a.assignment_id,
                amount: self.tasks[&a.task_id].reward,
                reason: LedgerReason::Reward,
                at: now,
            },
        }
    }

    fn sweep(&self, now: DateTime<Utc>, policy: &Policy) -> Decision {
        let mut events = Vec::new();
        let mut summary = SweepSummary::default();
        let mut expired = BTreeSet::new();
        for a in self.assignments.values() {
            match a.state {
                AssignmentState::Claimed if now > a.deadline => {
                    expired.insert(a.assignment_id);
                    summary.expired_assignments.push(a.assignment_id);
                    events.push(Event::AssignmentExpired {
                        assignment_id: a.assignment_id,
                        at: now,
                    });
                }
                AssignmentState::Submitted
                    if a.submitted_at.is_some_and(|t| now - t > policy.auto_approve_after) =>
                {
                    summary.approved.push(a.assignment_id);
                    events.push(self.approval(a, now));
                }
                _ => {}
            }
        }
        for t in self.tasks.values() {
            if t.state != TaskState::Open || now <= t.expires_at {
                continue;
            }
            for id in &t.assignments {
                let a = &self.assignments[id];
                if a.state == AssignmentState::Claimed && expired.insert(*id) {
                    summary.expired_assignments.push(*id);
                    events.push(Event::AssignmentExpired {
                        assignment_id: *id,
                        at: now,
                    });
                }
            }
            summary.expired_tasks.push(t.task_id);
            events.push(Event::TaskExpired {
                task_id: t.task_id,
                at: now,
            });
        }
        Decision::ok(events, Reply::Swept(summary))
    }

    fn count(&self, task: &Task, pred: impl Fn(AssignmentState) -> bool) -> usize {
        task.assignments
            .iter()
            .filter(|id| pred(self.assignments[id].state))
            .count()
    }

    fn refresh_availability(&mut self, task_id: TaskId) {
        let task = &self.tasks[&task_id];
        let free = task.state == TaskState::Open && self.count(task, |s| s.occupies_slot()) < task.k;
        if free {
            self.available.insert(task_id);
        } else {
            self.available.remove(&task_id);
        }
    }

    /// Applies one event. Events come from [`State::handle`] on the same
    /// state, so lookups cannot fail.
    pub fn apply(&mut self, event: &Event) {
        self.seq += 1;
        match event {
            Event::WorkerRegistered { profile } => {
                self.workers.insert(profile.worker_id.clone(), profile.clone());
            }
            Event::BatchCreated { batch, tasks } => {
                for t in tasks {
                    for item in &t.items {
                        self.items.insert(item.clone(), t.task_id);
                    }
                    self.available.insert(t.task_id);
                    self.tasks.insert(t.task_id, t.clone());
                    self.next_task = self.next_task.max(t.task_id.0 + 1);
                }
                self.next_batch = self.next_batch.max(batch.batch_id.0 + 1);
                self.batches.insert(batch.batch_id, batch.clone());
            }
            Event::AssignmentClaimed { assignment } => {
                let id = assignment.assignment_id;
                self.next_assignment = self.next_assignment.max(id.0 + 1);
                self.worker_tasks
                    .entry(assignment.worker_id.clone())
                    .or_default()
                    .insert(assignment.task_id);
                self.tasks
                    .get_mut(&assignment.task_id)
                    .expect("claimed task exists")
                    .assignments
                    .push(id);
                self.assignments.insert(id, assignment.clone());
                self.refresh_availability(assignment.task_id);
            }
            Event::AssignmentSubmitted {
                assignment_id,
                answers,
                at,
            } => {
                let a = self.assignments.get_mut(assignment_id).expect("assignment exists");
                a.state = AssignmentState::Submitted;
                a.answers = answers.clone();
                a.submitted_at = Some(*at);
                if let Some(w) = self.workers.get_mut(&a.worker_id) {
                    w.submitted_count += 1;
                }
            }
            Event::TaskCompleted { task_id, .. } => {
                self.tasks.get_mut(task_id).expect("task exists").state = TaskState::Complete;
                self.available.remove(task_id);
            }
            Event::AssignmentExpired { assignment_id, at } => {
                let a = self.assignments.get_mut(assignment_id).expect("assignment exists");
                a.state = AssignmentState::Expired;
                a.resolved_at = Some(*at);
                let task_id = a.task_id;
                self.refresh_availability(task_id);
            }
            Event::AssignmentApproved { assignment_id, entry } => {
                let a = self.assignments.get_mut(assignment_id).expect("assignment exists");
                a.state = AssignmentState::Approved;
                a.resolved_at = Some(entry.at);
                if let Some(w) = self.workers.get_mut(&entry.worker_id) {
                    w.approved_count += 1;
                    w.balance += entry.amount;
                }
                self.ledger.push(entry.clone());
            }
            Event::AssignmentRejected { assignment_id, at } => {
                let a = self.assignments.get_mut(assignment_id).expect("assignment exists");
                a.state = AssignmentState::Rejected;
                a.resolved_at = Some(*at);
                if let Some(w) = self.workers.get_mut(&a.worker_id) {
                    w.rejected_count += 1;
                }
            }
            Event::TaskExpired { task_id, .. } => {
                self.tasks.get_mut(task_id).expect("task exists").state = TaskState::Expired;
                self.available.remove(task_id);
            }
        }
    }

    // reads

    pub fn worker_view(&self, id: &WorkerId, policy: &Policy) -> Result<WorkerView> {
        let profile = self
            .workers
            .get(id)
            .ok_or_else(|| OrchestratorError::UnknownWorker(id.clone()))?;
        let pending: Micros = self
            .worker_tasks
            .get(id)
            .into_iter()
            .flatten()
            .flat_map(|t| &self.tasks[t].assignments)
            .map(|a| &self.assignments[a])
            .filter(|a| &a.worker_id == id && a.state == AssignmentState::Submitted)
            .map(|a| self.tasks[&a.task_id].reward)
            .sum();
        Ok(WorkerView {
            approval_rate: profile.approval_rate(),
            qualified: is_qualified(profile, policy),
            pending,
            pending_usd: usd(pending),
            balance_usd: usd(profile.balance),
            profile: profile.clone(),
        })
    }

    /// One vote per answer of every answered assignment, in claim order.
    pub fn task_votes(&self, task: &Task) -> Vec<Vote> {
        task.assignments
            .iter()
            .map(|id| &self.assignments[id])
            .filter(|a| a.state.has_answers())
            .flat_map(|a| {
                a.answers.iter().map(move |ans| {
                    Vote::new(
                        ans.item_id.clone(),
                        a.worker_id.clone(),
                        ans.label,
                        a.submitted_at.expect("answered assignments have a time"),
                    )
                })
            })
            .collect()
    }

    pub fn task_status(&self, id: TaskId) -> Result<TaskStatus> {
        let task = self.tasks.get(&id).ok_or(OrchestratorError::UnknownTask(id))?;
        let votes = self.task_votes(task);
        let rule = ConsensusRule::majority(task.k);
        let mut items = Vec::new();
        for item in &task.items {
            let ballot = Ballot::from_votes(
                item.clone(),
                task.k,
                votes.iter().filter(|v| &v.item_id == item).cloned(),
            )
            .expect("a task never collects more than k votes per item");
            let outcome = match task.state {
                _ if ballot.is_complete() => ItemOutcome::Consensus {
                    result: rule.aggregate(&ballot).expect("complete ballot"),
                },
                TaskState::Expired => ItemOutcome::NoConsensusByExpiry,
                _ => ItemOutcome::Pending,
            };
            items.push(ItemStatus {
                item_id: item.clone(),
                votes: ballot.votes().len(),
                outcome,
            });
        }
        Ok(TaskStatus {
            active_assignments: self.count(task, |s| s.occupies_slot()),
            submitted_assignments: self.count(task, |s| s.has_answers()),
            task: task.clone(),
            votes,
            items,
        })
    }

    pub fn batch(&self, id: BatchId) -> Result<&Batch> {
        self.batches.get(&id).ok_or(OrchestratorError::UnknownBatch(id))
    }

    pub fn batch_votes(&self, id: BatchId) -> Result<Vec<Vote>> {
        Ok(self
            .batch(id)?
            .tasks
            .iter()
            .flat_map(|t| self.task_votes(&self.tasks[t]))
            .collect())
    }

    /// Consensus results for the complete ballots of a batch.
    pub fn batch_consensus(&self, id: BatchId) -> Result<Vec<ConsensusResult>> {
        let batch = self.batch(id)?;
        let mut out = Vec::new();
        for t in &batch.tasks {
            let task = &self.tasks[t];
            let votes = self.task_votes(task);
            let agg = aggregate_corpus(&votes, &ConsensusRule::majority(task.k))
                .expect("task ballots are consistent");
            out.extend(agg.results);
        }
        Ok(out)
    }

    pub fn ledger_total(&self) -> Micros {
        self.ledger.iter().map(|e| e.amount).sum()
    }
}

fn same_answers(stored: &[Answer], sent: &[Answer]) -> bool {
    stored.len() == sent.len() && sent.iter().all(|a| stored.contains(a))
}

fn check_answers(items: &[ItemId], answers: &[Answer]) -> Result<()> {
    if answers.len() != items.len() {
        return Err(OrchestratorError::InvalidAnswers(format!(
            "expected {} answers, got {}",
            items.len(),
            answers.len()
        )));
    }
    for item in items {
        let n = answers.iter().filter(|a| &a.item_id == item).count();
        if n != 1 {
            return Err(OrchestratorError::InvalidAnswers(format!(
                "item {item} answered {n} times"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crowdcell_core::annotation::{CellClass, Outcome};

    fn t0() -> DateTime<Utc> {
        DateTime::from_timestamp(1_700_000_000, 0).unwrap()
    }

    struct Harness {
        state: State,
        events: Vec<Event>,
        policy: Policy,
    }

    impl Harness {
        fn new() -> Self {
            Self {
                state: State::new(),
                events: Vec::new(),
                policy: Policy::default(),
            }
        }

        fn run(&mut self, cmd: Command, now: DateTime<Utc>) -> Result<Reply> {
            let d = self.state.handle(&cmd, now, &self.policy);
            for e in &d.events {
                self.state.apply(e);
                self.events.push(e.clone());
            }
            d.result
        }

        fn worker(&mut self, id: &str) {
            self.run(Command::RegisterWorker(Registration::new(id, true)), t0()).unwrap();
        }

        fn batch(&mut self, n: usize) -> Vec<TaskId> {
            let first = self.state.items.len();
            let spec = BatchSpec::from_ids((first..first + n).map(|i| format!("i{i:03}")));
            match self.run(Command::CreateBatch(spec), t0()).unwrap() {
                Reply::Batch { tasks, .. } => tasks,
                r => panic!("{r:?}"),
            }
        }

        fn claim(&mut self, w: &str, now: DateTime<Utc>) -> Result<Assignment> {
            self.run(Command::Claim { worker_id: w.into() }, now).map(|r| match r {
                Reply::Assignment { assignment } => assignment,
                r => panic!("{r:?}"),
            })
        }

        fn submit(&mut self, a: &Assignment, labels: &[CellClass], now: DateTime<Utc>) -> Result<Reply> {
            let task = &self.state.tasks[&a.task_id];
            let answers = task
                .items
                .iter()
                .zip(labels)
                .map(|(i, l)| Answer {
                    item_id: i.clone(),
                    label: *l,
                })
                .collect();
            self.run(
                Command::Submit {
                    assignment_id: a.assignment_id,
                    answers,
                },
                now,
            )
        }
    }

    #[test]
    fn pairing() {
        let mut h = Harness::new();
        assert_eq!(h.batch(4).len(), 2);
        let tasks = h.batch(5).iter().map(|t| h.state.tasks[t].items.len()).collect::<Vec<_>>();
        assert_eq!(tasks, [2, 2, 1]);
        let mut h = Harness::new();
        let tasks = h.batch(848);
        assert_eq!(tasks.len(), 424);
        let slots: usize = tasks.iter().map(|t| h.state.tasks[t].items.len() * h.state.tasks[t].k).sum();
        assert_eq!(slots, 4240);
        assert_eq!(
            h.run(Command::CreateBatch(BatchSpec::default()), t0()),
            Err(OrchestratorError::EmptyBatch)
        );
        assert!(matches!(
            h.run(Command::CreateBatch(BatchSpec::from_ids(["i000"])), t0()),
            Err(OrchestratorError::DuplicateItem(_))
        ));
    }

    #[test]
    fn shuffled_pairing_is_seeded() {
        let pairs = |seed| {
            let mut h = Harness::new();
            let mut spec = BatchSpec::from_ids((0..10).map(|i| format!("i{i}")));
            spec.pairing = Pairing::Shuffled(seed);
            h.run(Command::CreateBatch(spec), t0()).unwrap();
            h.state.tasks.values().map(|t| t.items.clone()).collect::<Vec<_>>()
        };
        assert_eq!(pairs(1), pairs(1));
        assert_ne!(pairs(1), pairs(2));
    }

    #[test]
    fn qualification() {
        let mut h = Harness::new();
        h.batch(2);
        let reg = |id: &str, master, rate| Command::RegisterWorker(Registration::new(id, master).with_rate(rate));
        h.run(reg("low", true, 0.85), t0()).unwrap();
        h.run(reg("edge", true, 0.90), t0()).unwrap();
        h.run(reg("nomaster", false, 0.99), t0()).unwrap();
        h.run(reg("good", true, 0.91), t0()).unwrap();
        for w in ["low", "edge", "nomaster"] {
            assert!(matches!(h.claim(w, t0()), Err(OrchestratorError::NotQualified(_))), "{w}");
        }
        assert!(h.claim("good", t0()).is_ok());
        assert!(matches!(h.claim("ghost", t0()), Err(OrchestratorError::UnknownWorker(_))));
        assert!(matches!(h.run(reg("good", true, 1.0), t0()), Err(OrchestratorError::WorkerExists(_))));
    }

    #[test]
    fn five_distinct_workers_then_none() {
        let mut h = Harness::new();
        h.batch(2);
        for w in 0..6 {
            h.worker(&format!("w{w}"));
        }
        let mut seen = BTreeSet::new();
        for w in 0..5 {
            let a = h.claim(&format!("w{w}"), t0()).unwrap();
            assert!(seen.insert(a.assignment_id));
        }
        assert_eq!(h.claim("w5", t0()), Err(OrchestratorError::NoneAvailable));
        // same worker never gets the task twice
        assert_eq!(h.claim("w0", t0()), Err(OrchestratorError::NoneAvailable));
    }

    #[test]
    fn submission_lifecycle() {
        use CellClass::*;
        let mut h = Harness::new();
        let task = h.batch(2)[0];
        for w in 0..5 {
            h.worker(&format!("w{w}"));
        }
        let status = h.state.task_status(task).unwrap();
        assert_eq!((status.task.state, status.votes.len()), (TaskState::Open, 0));

        let labels = [[Circular, Other], [Circular, Other], [Circular, Elongated], [Elongated, Circular], [Other, Circular]];
        let mut assignments = Vec::new();
        for (w, l) in labels.iter().enumerate() {
            let a = h.claim(&format!("w{w}"), t0()).unwrap();
            let r = h.submit(&a, l, t0() + Duration::minutes(10)).unwrap();
            let Reply::Receipt(r) = r else { panic!() };
            assert_eq!(r.votes_recorded, 2);
            assert_eq!(r.task_complete, w == 4);
            assignments.push(a);
        }
        let status = h.state.task_status(task).unwrap();
        assert_eq!(status.task.state, TaskState::Complete);
        assert_eq!(status.votes.len(), 10);
        let ItemOutcome::Consensus { result } = &status.items[0].outcome else { panic!() };
        assert_eq!(
            result.outcome,
            Outcome::Label {
                class: Circular,
                agreement: 3
            }
        );
        let ItemOutcome::Consensus { result } = &status.items[1].outcome else { panic!() };
        assert!(result.is_no_consensus());

        // identical resubmission is harmless, a different one is not
        let r = h.submit(&assignments[0], &labels[0], t0() + Duration::minutes(20)).unwrap();
        assert!(matches!(r, Reply::Receipt(Receipt { duplicate: true, .. })));
        assert!(matches!(
            h.submit(&assignments[0], &[Other, Other], t0()),
            Err(OrchestratorError::WrongState { .. })
        ));
        let view = h.state.worker_view(&"w0".into(), &h.policy).unwrap();
        assert_eq!(view.pending, 10_000);
    }

    #[test]
    fn deadline_boundary() {
        let mut h = Harness::new();
        h.batch(2);
        h.worker("a");
        h.worker("b");
        let a = h.claim("a", t0()).unwrap();
        let b = h.claim("b", t0()).unwrap();
        let labels = [CellClass::Circular; 2];
        assert!(h.submit(&a, &labels, a.deadline).is_ok());
        let late = h.submit(&b, &labels, b.deadline + Duration::seconds(1));
        assert_eq!(late, Err(OrchestratorError::DeadlineExceeded(b.assignment_id)));
        assert_eq!(h.state.assignments[&b.assignment_id].state, AssignmentState::Expired);
        assert!(h.state.available.contains(&b.task_id));
    }

    #[test]
    fn bad_answers() {
        let mut h = Harness::new();
        h.batch(2);
        h.worker("a");
        let a = h.claim("a", t0()).unwrap();
        assert!(matches!(h.submit(&a, &[CellClass::Other], t0()), Err(OrchestratorError::InvalidAnswers(_))));
        let dup = vec![
            Answer {
                item_id: "i000".into(),
                label: CellClass::Other,
            };
            2
        ];
        let r = h.run(
            Command::Submit {
                assignment_id: a.assignment_id,
                answers: dup,
            },
            t0(),
        );
        assert!(matches!(r, Err(OrchestratorError::InvalidAnswers(_))));
        assert_eq!(h.state.assignments[&a.assignment_id].state, AssignmentState::Claimed);
    }

    #[test]
    fn sweep_rules() {
        let mut h = Harness::new();
        let tasks = h.batch(4);
        h.worker("a");
        h.worker("b");
        let a = h.claim("a", t0()).unwrap();
        h.submit(&a, &[CellClass::Circular; 2], t0()).unwrap();
        let b = h.claim("b", t0()).unwrap();
        assert_eq!(a.task_id, b.task_id);

        // 61 minutes: the unsubmitted claim lapses and the slot reopens
        let r = h.run(Command::Sweep, t0() + Duration::minutes(61)).unwrap();
        let Reply::Swept(s) = r else { panic!() };
        assert_eq!(s.expired_assignments, [b.assignment_id]);
        assert!(s.approved.is_empty());
        h.worker("c");
        assert_eq!(h.claim("c", t0() + Duration::minutes(62)).unwrap().task_id, tasks[0]);
        // b lost its claim and is not offered the task again
        assert_eq!(h.claim("b", t0() + Duration::minutes(62)).unwrap().task_id, tasks[1]);

        // exactly 7 days after submission: not yet
        let week = t0() + Duration::days(7);
        let Reply::Swept(s) = h.run(Command::Sweep, week).unwrap() else { panic!() };
        assert!(s.approved.is_empty());
        // tasks past three days are expired, with their partial ballots
        assert_eq!(s.expired_tasks, tasks);
        let later = week + Duration::seconds(1);
        let Reply::Swept(s) = h.run(Command::Sweep, later).unwrap() else { panic!() };
        assert_eq!(s.approved, [a.assignment_id]);
        assert_eq!(h.state.ledger_total(), 10_000);
        assert_eq!(h.state.workers[&WorkerId::from("a")].balance, 10_000);
        let status = h.state.task_status(tasks[0]).unwrap();
        assert_eq!(status.items[0].outcome, ItemOutcome::NoConsensusByExpiry);
        assert_eq!(status.items[0].votes, 1);

        // same `now` again changes nothing
        let before = h.state.clone();
        let Reply::Swept(s) = h.run(Command::Sweep, later).unwrap() else { panic!() };
        assert_eq!(s, SweepSummary::default());
        assert_eq!(h.state, before);
    }

    #[test]
    fn manual_review() {
        let mut h = Harness::new();
        h.batch(2);
        h.worker("a");
        h.worker("b");
        let a = h.claim("a", t0()).unwrap();
        let b = h.claim("b", t0()).unwrap();
        let review = |id, approve| Command::Review {
            assignment_id: id,
            approve,
        };
        assert!(matches!(h.run(review(a.assignment_id, true), t0()), Err(OrchestratorError::WrongState { .. })));
        h.submit(&a, &[CellClass::Other; 2], t0()).unwrap();
        h.submit(&b, &[CellClass::Other; 2], t0()).unwrap();
        h.run(review(a.assignment_id, true), t0()).unwrap();
        h.run(review(b.assignment_id, false), t0()).unwrap();
        assert_eq!(h.state.ledger.len(), 1);
        let w = &h.state.workers[&WorkerId::from("b")];
        assert_eq!((w.rejected_count, w.approval_rate()), (1, 0.0));
        // a decided assignment is not auto-approved later
        let Reply::Swept(s) = h.run(Command::Sweep, t0() + Duration::days(30)).unwrap() else { panic!() };
        assert!(s.approved.is_empty());
    }

    #[test]
    fn replay_matches() {
        let mut h = Harness::new();
        h.batch(6);
        for w in 0..7 {
            h.worker(&format!("w{w}"));
        }
        for round in 0..3 {
            for w in 0..7 {
                if let Ok(a) = h.claim(&format!("w{w}"), t0() + Duration::minutes(round)) {
                    if (w + round as usize) % 3 != 0 {
                        let _ = h.submit(&a, &[CellClass::Elongated; 2], t0() + Duration::minutes(round + 5));
                    }
                }
            }
            h.run(Command::Sweep, t0() + Duration::minutes(90 * (round + 1))).unwrap();
        }
        h.run(Command::Sweep, t0() + Duration::days(8)).unwrap();
        assert_eq!(State::replay(&h.events), h.state);
        let json = serde_json::to_string(&h.state).unwrap();
        let back: State = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h.state);
    }
}
