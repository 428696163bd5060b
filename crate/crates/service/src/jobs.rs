//! In-memory job table and queue.

use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use busfactor_core::RepoCoordinates;
use serde::Serialize;
use tokio::sync::Notify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogLine {
    pub index: usize,
    /// Epoch seconds with millisecond resolution.
    pub time: f64,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct JobSummary {
    pub job_id: String,
    pub owner: String,
    pub name: String,
    pub state: JobState,
    pub created_at: i64,
    pub finished_at: Option<i64>,
    pub error: Option<String>,
    pub log_lines: usize,
}

#[derive(Debug)]
struct Job {
    id: String,
    coords: RepoCoordinates,
    state: JobState,
    log: Vec<LogLine>,
    created_at: i64,
    finished_at: Option<i64>,
    error: Option<String>,
}

impl Job {
    fn summary(&self) -> JobSummary {
        JobSummary {
            job_id: self.id.clone(),
            owner: self.coords.owner.clone(),
            name: self.coords.name.clone(),
            state: self.state,
            created_at: self.created_at,
            finished_at: self.finished_at,
            error: self.error.clone(),
            log_lines: self.log.len(),
        }
    }
}

#[derive(Default)]
struct Table {
    jobs: HashMap<String, Job>,
    order: Vec<String>,
    queue: VecDeque<String>,
    /// Non-terminal job per repository store key.
    active: HashMap<String, String>,
}

#[derive(Debug, PartialEq, Eq)]
pub enum Submitted {
    New(String),
    Existing(String),
}

impl Submitted {
    pub fn id(&self) -> &str {
        match self {
            Submitted::New(id) | Submitted::Existing(id) => id,
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct QueueFull;

pub struct LogSlice {
    pub state: JobState,
    pub lines: Vec<LogLine>,
    pub next: usize,
}

pub fn now_secs() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_millis() as f64 / 1000.0)
}

pub struct Jobs {
    table: Mutex<Table>,
    ready: Notify,
    cap: usize,
}

impl Jobs {
    pub fn new(cap: usize) -> Self {
        Self {
            table: Mutex::new(Table::default()),
            ready: Notify::new(),
            cap,
        }
    }

    /// Enqueues `coords` unless a job for the same repository is still
    /// pending, in which case that job's id is returned.
    pub fn submit(&self, coords: RepoCoordinates) -> Result<Submitted, QueueFull> {
        let mut t = self.table.lock().unwrap();
        let key = coords.store_key();
        if let Some(id) = t.active.get(&key) {
            return Ok(Submitted::Existing(id.clone()));
        }
        if t.queue.len() >= self.cap {
            return Err(QueueFull);
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        t.jobs.insert(
            id.clone(),
            Job {
                id: id.clone(),
                coords,
                state: JobState::Queued,
                log: Vec::new(),
                created_at: now_secs() as i64,
                finished_at: None,
                error: None,
            },
        );
        t.order.push(id.clone());
        t.queue.push_back(id.clone());
        t.active.insert(key, id.clone());
        drop(t);
        self.ready.notify_one();
        Ok(Submitted::New(id))
    }

    /// Waits for the next queued job and marks it RUNNING.
    pub async fn next(&self) -> (String, RepoCoordinates) {
        loop {
            let notified = self.ready.notified();
            {
                let mut t = self.table.lock().unwrap();
                if let Some(id) = t.queue.pop_front() {
                    let more = !t.queue.is_empty();
                    let job = t.jobs.get_mut(&id).expect("queued job exists");
                    job.state = JobState::Running;
                    let coords = job.coords.clone();
                    drop(t);
                    if more {
                        self.ready.notify_one();
                    }
                    return (id, coords);
                }
            }
            notified.await;
        }
    }

    pub fn log(&self, id: &str, text: &str) {
        let mut t = self.table.lock().unwrap();
        if let Some(job) = t.jobs.get_mut(id) {
            let index = job.log.len();
            job.log.push(LogLine {
                index,
                time: now_secs(),
                text: text.to_string(),
            });
        }
    }

    /// Moves a RUNNING job to DONE, or FAILED when `error` is set.
    pub fn finish(&self, id: &str, error: Option<String>) {
        let mut t = self.table.lock().unwrap();
        let Some(job) = t.jobs.get_mut(id) else { return };
        if job.state.is_terminal() {
            return;
        }
        job.state = if error.is_some() {
            JobState::Failed
        } else {
            JobState::Done
        };
        job.error = error;
        job.finished_at = Some(now_secs() as i64);
        let key = job.coords.store_key();
        if t.active.get(&key).map(String::as_str) == Some(id) {
            t.active.remove(&key);
        }
    }

    pub fn list(&self) -> Vec<JobSummary> {
        let t = self.table.lock().unwrap();
        t.order.iter().map(|id| t.jobs[id].summary()).collect()
    }

    pub fn get(&self, id: &str) -> Option<JobSummary> {
        self.table.lock().unwrap().jobs.get(id).map(Job::summary)
    }

    /// Log lines with index ≥ `from`.
    pub fn log_from(&self, id: &str, from: usize) -> Option<LogSlice> {
        let t = self.table.lock().unwrap();
        let job = t.jobs.get(id)?;
        Some(LogSlice {
            state: job.state,
            lines: job.log.get(from..).map(<[LogLine]>::to_vec).unwrap_or_default(),
            next: job.log.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(name: &str) -> RepoCoordinates {
        RepoCoordinates::github("o", name).unwrap()
    }

    #[test]
    fn dedupes_pending_jobs() {
        let jobs = Jobs::new(4);
        let a = jobs.submit(coords("a")).unwrap();
        assert!(matches!(a, Submitted::New(_)));
        assert_eq!(jobs.submit(coords("a")).unwrap(), Submitted::Existing(a.id().to_string()));
        jobs.finish(a.id(), None);
        assert!(matches!(jobs.submit(coords("a")).unwrap(), Submitted::New(_)));
    }

    #[test]
    fn queue_cap() {
        let jobs = Jobs::new(2);
        jobs.submit(coords("a")).unwrap();
        jobs.submit(coords("b")).unwrap();
        assert_eq!(jobs.submit(coords("c")), Err(QueueFull));
    }

    #[tokio::test]
    async fn states_move_forward_only() {
        let jobs = Jobs::new(2);
        let id = jobs.submit(coords("a")).unwrap().id().to_string();
        assert_eq!(jobs.get(&id).unwrap().state, JobState::Queued);
        let (next, _) = jobs.next().await;
        assert_eq!(next, id);
        assert_eq!(jobs.get(&id).unwrap().state, JobState::Running);
        jobs.log(&id, "one");
        jobs.log(&id, "two");
        jobs.finish(&id, Some("boom".into()));
        jobs.finish(&id, None);
        let job = jobs.get(&id).unwrap();
        assert_eq!(job.state, JobState::Failed);
        assert_eq!(job.error.as_deref(), Some("boom"));

        let slice = jobs.log_from(&id, 1).unwrap();
        assert_eq!(slice.lines.len(), 1);
        assert_eq!(slice.lines[0].text, "two");
        assert!(jobs.log_from(&id, 2).unwrap().lines.is_empty());
        assert!(jobs.log_from(&id, 9).unwrap().lines.is_empty());
    }
}
