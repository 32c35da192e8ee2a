//! Background job records and the bounded training queue.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use tokio::sync::Semaphore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Train,
    Sample,
    Reharmonize,
    Evaluate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobStatus::Done | JobStatus::Failed)
    }

    /// queued → running → done | failed, nothing else.
    pub fn can_become(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Queued, JobStatus::Running) | (JobStatus::Running, JobStatus::Done) | (JobStatus::Running, JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub status: JobStatus,
    /// Milliseconds since the Unix epoch.
    pub created_ms: u64,
    pub started_ms: Option<u64>,
    pub finished_ms: Option<u64>,
    /// Output files; non-empty exactly when the job is done.
    pub artifacts: Vec<String>,
    pub model_id: Option<String>,
    pub error: Option<String>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionError {
    pub from: JobStatus,
    pub to: JobStatus,
}

impl JobRecord {
    pub fn new(id: String, kind: JobKind) -> Self {
        Self {
            id,
            kind,
            status: JobStatus::Queued,
            created_ms: now_ms(),
            started_ms: None,
            finished_ms: None,
            artifacts: Vec::new(),
            model_id: None,
            error: None,
        }
    }

    fn transition(&mut self, to: JobStatus) -> Result<(), TransitionError> {
        if !self.status.can_become(to) {
            return Err(TransitionError { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }

    pub fn start(&mut self) -> Result<(), TransitionError> {
        self.transition(JobStatus::Running)?;
        self.started_ms = Some(now_ms());
        Ok(())
    }

    pub fn succeed(&mut self, artifacts: Vec<String>, model_id: Option<String>) -> Result<(), TransitionError> {
        if artifacts.is_empty() {
            return self.fail("job finished without artifacts".into());
        }
        self.transition(JobStatus::Done)?;
        self.finished_ms = Some(now_ms());
        self.artifacts = artifacts;
        self.model_id = model_id;
        Ok(())
    }

    pub fn fail(&mut self, message: String) -> Result<(), TransitionError> {
        self.transition(JobStatus::Failed)?;
        self.finished_ms = Some(now_ms());
        self.error = Some(message);
        Ok(())
    }
}

/// In-memory job table with a cap on unfinished jobs and a limit on how
/// many run at once.
#[derive(Debug)]
pub struct JobBoard {
    records: Mutex<HashMap<String, JobRecord>>,
    next_id: AtomicU64,
    unfinished: AtomicUsize,
    capacity: usize,
    workers: Arc<Semaphore>,
}

impl JobBoard {
    /// `capacity` bounds queued plus running jobs; `workers` bounds running ones.
    pub fn new(capacity: usize, workers: usize) -> Self {
        Self {
            records: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            unfinished: AtomicUsize::new(0),
            capacity,
            workers: Arc::new(Semaphore::new(workers.max(1))),
        }
    }

    pub fn workers(&self) -> Arc<Semaphore> {
        self.workers.clone()
    }

    /// Registers a queued job, or `None` when the queue is full.
    pub fn submit(&self, kind: JobKind) -> Option<JobRecord> {
        self.unfinished
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < self.capacity).then_some(n + 1))
            .ok()?;
        let n = self.next_id.fetch_add(1, Ordering::SeqCst);
        let kind_name = match kind {
            JobKind::Train => "train",
            JobKind::Sample => "sample",
            JobKind::Reharmonize => "reharmonize",
            JobKind::Evaluate => "evaluate",
        };
        let record = JobRecord::new(format!("{kind_name}-{n:06}"), kind);
        self.records.lock().expect("job table lock").insert(record.id.clone(), record.clone());
        Some(record)
    }

    pub fn get(&self, id: &str) -> Option<JobRecord> {
        self.records.lock().expect("job table lock").get(id).cloned()
    }

    pub fn unfinished(&self) -> usize {
        self.unfinished.load(Ordering::SeqCst)
    }

    fn update(&self, id: &str, f: impl FnOnce(&mut JobRecord) -> Result<(), TransitionError>) -> Result<(), TransitionError> {
        let mut records = self.records.lock().expect("job table lock");
        let rec = records.get_mut(id).expect("job ids come from submit");
        let was_terminal = rec.status.is_terminal();
        f(rec)?;
        if !was_terminal && rec.status.is_terminal() {
            self.unfinished.fetch_sub(1, Ordering::SeqCst);
        }
        Ok(())
    }

    pub fn start(&self, id: &str) -> Result<(), TransitionError> {
        self.update(id, |r| r.start())
    }

    pub fn succeed(&self, id: &str, artifacts: Vec<String>, model_id: Option<String>) -> Result<(), TransitionError> {
        self.update(id, |r| r.succeed(artifacts, model_id))
    }

    pub fn fail(&self, id: &str, message: String) -> Result<(), TransitionError> {
        self.update(id, |r| r.fail(message))
    }
}
