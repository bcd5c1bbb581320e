//! The discrete-time event loop.
//!
//! Events are bucketed by tick. Within a tick they run in a fixed order
//! (task finishes, data arrivals, job arrivals, deadline timers), then the
//! starvation sweep, then one auction if anything happened at that tick.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::auction::{clear, starvation_tick, ClearingMode, ReadyQueue, TaskRef};
use crate::error::{ModelError, Result};
use crate::model::{Job, JobId, TaskId, Tick};
use crate::platform::{queue_ready_at, ClusterId, DepDone, Platform, PlatformSpec};
use crate::policy::{Policy, PolicyOptions, QueueContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    TaskFinish,
    DataArrival,
    JobArrival,
    DeadlineTimer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Event {
    tick: Tick,
    kind: EventKind,
    job: JobId,
    task: TaskId,
    /// positions into the run's job/task lists
    at: TaskRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogKind {
    Arrive,
    Ready,
    Start,
    Finish,
    Complete,
    Starve,
}

impl LogKind {
    fn as_str(self) -> &'static str {
        match self {
            LogKind::Arrive => "arrive",
            LogKind::Ready => "ready",
            LogKind::Start => "start",
            LogKind::Finish => "finish",
            LogKind::Complete => "complete",
            LogKind::Starve => "starve",
        }
    }
}

/// One line of the audit log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub tick: Tick,
    pub kind: LogKind,
    pub job: JobId,
    pub task: Option<TaskId>,
    pub cluster: Option<ClusterId>,
    pub bid: Option<f64>,
}

pub const EVENT_LOG_HEADER: &str = "tick,event,job,task,cluster,bid";

impl LogRecord {
    pub fn to_line(&self) -> String {
        let mut s = String::new();
        write!(s, "{},{},{},", self.tick, self.kind.as_str(), self.job).unwrap();
        if let Some(t) = self.task {
            write!(s, "{t}").unwrap();
        }
        s.push(',');
        if let Some(c) = self.cluster {
            write!(s, "{c}").unwrap();
        }
        s.push(',');
        if let Some(b) = self.bid {
            write!(s, "{b}").unwrap();
        }
        s
    }
}

/// Renders a log with its header line, newline-terminated.
pub fn render_event_log(log: &[LogRecord]) -> String {
    let mut s = String::with_capacity(32 * (log.len() + 1));
    s.push_str(EVENT_LOG_HEADER);
    s.push('\n');
    for r in log {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}

/// Where and when a task actually ran.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub job: JobId,
    pub task: TaskId,
    pub cluster: ClusterId,
    pub ready: Tick,
    pub start: Tick,
    pub finish: Tick,
    pub bid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub job: JobId,
    pub arrive: Tick,
    pub finish: Option<Tick>,
    pub starved: bool,
    pub slr: Option<f64>,
    pub value: f64,
    pub vmax: f64,
    pub cp: u64,
    /// core-ticks
    pub work: u64,
    pub tasks: u32,
    /// tasks that were placed before the job completed or starved
    pub tasks_started: u32,
}

impl OutcomeRecord {
    pub fn achieved_slr(&self) -> Option<f64> {
        self.finish.map(|f| (f - self.arrive) as f64 / self.cp as f64)
    }
}

pub const OUTCOME_CSV_HEADER: &str = "job,arrive,finish,starved,slr,value,vmax,cp,work,tasks,tasks_started";

pub fn render_outcomes_csv(outcomes: &[OutcomeRecord]) -> String {
    let mut s = String::from(OUTCOME_CSV_HEADER);
    s.push('\n');
    for o in outcomes {
        let finish = o.finish.map(|f| f.to_string()).unwrap_or_default();
        let slr = o.slr.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            o.job, o.arrive, finish, o.starved, slr, o.value, o.vmax, o.cp, o.work, o.tasks, o.tasks_started
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub policy: Policy,
    pub seed: u64,
    #[serde(default)]
    pub policy_opts: PolicyOptions,
    #[serde(default)]
    pub clearing: ClearingMode,
    #[serde(default)]
    pub event_log: bool,
}

impl SimOptions {
    pub fn new(policy: Policy, seed: u64) -> Self {
        SimOptions {
            policy,
            seed,
            policy_opts: PolicyOptions::default(),
            clearing: ClearingMode::default(),
            event_log: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunResult {
    /// One record per job, in ascending job id.
    pub outcomes: Vec<OutcomeRecord>,
    /// In start order.
    pub placements: Vec<Placement>,
    /// Empty unless requested.
    pub log: Vec<LogRecord>,
    pub instants: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TaskState {
    Blocked { deps_left: usize },
    InTransit,
    Queued,
    Running { cluster: ClusterId, start: Tick, ready: Tick },
    Done { cluster: ClusterId, finish: Tick },
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum JobState {
    Pending,
    Live,
    Completed,
    Starved,
}

struct Sim<'a> {
    jobs: &'a [Job],
    platform: Platform,
    opts: SimOptions,
    events: BinaryHeap<Reverse<Event>>,
    queue: ReadyQueue,
    tasks: Vec<Vec<TaskState>>,
    ready_at: Vec<Vec<Tick>>,
    job_state: Vec<JobState>,
    started: Vec<u32>,
    done: Vec<usize>,
    /// live jobs keyed by the first tick at which they count as starved
    deadlines: BTreeSet<(Tick, usize)>,
    outcomes: Vec<Option<OutcomeRecord>>,
    result: RunResult,
}

/// Simulates `jobs` on a fresh platform until every job completed or starved.
///
/// Rejects duplicate job ids and workloads the platform cannot host.
pub fn run(jobs: &[Job], platform: &PlatformSpec, opts: SimOptions) -> Result<RunResult> {
    let platform_state = Platform::new(platform)?;
    platform.check_jobs(jobs)?;
    let mut ids = BTreeSet::new();
    for j in jobs {
        if !ids.insert(j.id) {
            return Err(ModelError::DuplicateJob(j.id).into());
        }
    }
    let mut sim = Sim {
        jobs,
        platform: platform_state,
        opts,
        events: BinaryHeap::new(),
        queue: ReadyQueue::new(),
        tasks: jobs
            .iter()
            .map(|j| j.tasks.iter().map(|t| TaskState::Blocked { deps_left: t.deps.len() }).collect())
            .collect(),
        ready_at: jobs.iter().map(|j| vec![0; j.tasks.len()]).collect(),
        job_state: vec![JobState::Pending; jobs.len()],
        started: vec![0; jobs.len()],
        done: vec![0; jobs.len()],
        deadlines: BTreeSet::new(),
        outcomes: vec![None; jobs.len()],
        result: RunResult::default(),
    };
    for (i, j) in jobs.iter().enumerate() {
        sim.push(j.arrive, EventKind::JobArrival, (i, 0));
    }
    sim.run_loop();
    let mut outcomes: Vec<OutcomeRecord> =
        sim.outcomes.into_iter().map(|o| o.expect("every job resolves")).collect();
    outcomes.sort_by_key(|o| o.job);
    sim.result.outcomes = outcomes;
    Ok(sim.result)
}

impl Sim<'_> {
    fn push(&mut self, tick: Tick, kind: EventKind, at: TaskRef) {
        let job = &self.jobs[at.0];
        let task = if kind == EventKind::JobArrival || kind == EventKind::DeadlineTimer {
            TaskId(0)
        } else {
            job.tasks[at.1].id
        };
        self.events.push(Reverse(Event { tick, kind, job: job.id, task, at }));
    }

    fn log(&mut self, tick: Tick, kind: LogKind, at: TaskRef, cluster: Option<ClusterId>, bid: Option<f64>) {
        if !self.opts.event_log {
            return;
        }
        let job = &self.jobs[at.0];
        let task = match kind {
            LogKind::Arrive | LogKind::Complete | LogKind::Starve => None,
            _ => Some(job.tasks[at.1].id),
        };
        self.result.log.push(LogRecord { tick, kind, job: job.id, task, cluster, bid });
    }

    fn run_loop(&mut self) {
        while let Some(&Reverse(first)) = self.events.peek() {
            let now = first.tick;
            // timers of jobs that already resolved do not make an instant
            let mut instant = false;
            while let Some(&Reverse(ev)) = self.events.peek() {
                if ev.tick != now {
                    break;
                }
                self.events.pop();
                match ev.kind {
                    EventKind::TaskFinish => {
                        self.on_task_finish(ev.at, now);
                        instant = true;
                    }
                    EventKind::DataArrival => instant |= self.on_data_arrival(ev.at, now),
                    EventKind::JobArrival => {
                        self.on_job_arrival(ev.at.0, now);
                        instant = true;
                    }
                    EventKind::DeadlineTimer => instant |= self.job_state[ev.at.0] == JobState::Live,
                }
            }
            self.starve_sweep(now);
            if instant {
                self.clear_instant(now);
            }
        }
        debug_assert!(self.queue.is_empty());
        debug_assert!(self.platform.clusters.iter().all(|c| c.free_cores() == c.total_cores));
    }

    fn enqueue(&mut self, at: TaskRef, now: Tick) {
        self.tasks[at.0][at.1] = TaskState::Queued;
        self.queue.push(at);
        self.log(now, LogKind::Ready, at, None, None);
    }

    fn on_job_arrival(&mut self, j: usize, now: Tick) {
        let job = &self.jobs[j];
        self.job_state[j] = JobState::Live;
        let starve_at = starvation_tick(job);
        self.deadlines.insert((starve_at, j));
        self.push(starve_at, EventKind::DeadlineTimer, (j, 0));
        self.log(now, LogKind::Arrive, (j, 0), None, None);
        for t in 0..job.tasks.len() {
            if job.tasks[t].deps.is_empty() {
                self.ready_at[j][t] = now;
                self.enqueue((j, t), now);
            }
        }
    }

    fn on_data_arrival(&mut self, at: TaskRef, now: Tick) -> bool {
        if self.tasks[at.0][at.1] != TaskState::InTransit {
            return false;
        }
        self.enqueue(at, now);
        true
    }

    fn on_task_finish(&mut self, at: TaskRef, now: Tick) {
        let (j, t) = at;
        let job = &self.jobs[j];
        let TaskState::Running { cluster, .. } = self.tasks[j][t] else {
            panic!("finish event for task {at:?} that is not running");
        };
        let released = self.platform.cluster_mut(cluster).release(job.id, job.tasks[t].id);
        debug_assert_eq!(released.finish, now);
        self.tasks[j][t] = TaskState::Done { cluster, finish: now };
        self.done[j] += 1;
        self.log(now, LogKind::Finish, at, Some(cluster), None);

        if self.job_state[j] != JobState::Live {
            return;
        }
        if self.done[j] == job.tasks.len() {
            self.complete(j, now);
            return;
        }
        for &s in &job.tasks[t].succs {
            let TaskState::Blocked { deps_left } = &mut self.tasks[j][s] else {
                unreachable!("successor of an unfinished task already released");
            };
            *deps_left -= 1;
            if *deps_left > 0 {
                continue;
            }
            let deps: Vec<DepDone> = job.tasks[s]
                .deps
                .iter()
                .map(|&d| match self.tasks[j][d] {
                    TaskState::Done { cluster, finish } => {
                        DepDone { finish, cluster, exec: job.tasks[d].exec }
                    }
                    other => unreachable!("dependency in state {other:?}"),
                })
                .collect();
            let ready = queue_ready_at(&deps, job.tasks[s].kind, job.arrive, &self.platform);
            self.ready_at[j][s] = ready;
            if ready <= now {
                self.enqueue((j, s), now);
            } else {
                self.tasks[j][s] = TaskState::InTransit;
                self.push(ready, EventKind::DataArrival, (j, s));
            }
        }
    }

    fn complete(&mut self, j: usize, now: Tick) {
        let job = &self.jobs[j];
        self.job_state[j] = JobState::Completed;
        self.deadlines.remove(&(starvation_tick(job), j));
        let slr = (now - job.arrive) as f64 / job.cp as f64;
        assert!(slr >= 1.0, "job {} finished faster than its critical path (slr {slr})", job.id);
        self.outcomes[j] = Some(OutcomeRecord {
            job: job.id,
            arrive: job.arrive,
            finish: Some(now),
            starved: false,
            slr: Some(slr),
            value: job.curve.value(job.vmax, slr),
            vmax: job.vmax,
            cp: job.cp,
            work: job.total_work(),
            tasks: job.tasks.len() as u32,
            tasks_started: self.started[j],
        });
        self.log(now, LogKind::Complete, (j, 0), None, None);
    }

    fn starve_sweep(&mut self, now: Tick) {
        while let Some(&(tick, j)) = self.deadlines.first() {
            if tick > now {
                break;
            }
            self.deadlines.pop_first();
            debug_assert!(crate::auction::is_starved(&self.jobs[j], now));
            self.starve(j, now);
        }
    }

    fn starve(&mut self, j: usize, now: Tick) {
        let job = &self.jobs[j];
        self.job_state[j] = JobState::Starved;
        self.queue.remove_job(j);
        for st in self.tasks[j].iter_mut() {
            if matches!(st, TaskState::Blocked { .. } | TaskState::InTransit | TaskState::Queued) {
                *st = TaskState::Dropped;
            }
        }
        self.outcomes[j] = Some(OutcomeRecord {
            job: job.id,
            arrive: job.arrive,
            finish: None,
            starved: true,
            slr: None,
            value: 0.0,
            vmax: job.vmax,
            cp: job.cp,
            work: job.total_work(),
            tasks: job.tasks.len() as u32,
            tasks_started: self.started[j],
        });
        self.log(now, LogKind::Starve, (j, 0), None, None);
    }

    fn clear_instant(&mut self, now: Tick) {
        if self.queue.is_empty() {
            return;
        }
        self.result.instants += 1;
        let ctx = QueueContext {
            now,
            max_cp_in_queue: self.queue.max_cp(self.jobs),
            seed: self.opts.seed,
        };
        let assigned = clear(
            &mut self.queue,
            self.jobs,
            &mut self.platform,
            self.opts.policy,
            &ctx,
            &self.opts.policy_opts,
            self.opts.clearing,
        );
        for a in assigned {
            let (j, t) = a.task;
            let ready = self.ready_at[j][t];
            debug_assert!(ready <= now);
            self.tasks[j][t] = TaskState::Running { cluster: a.cluster, start: now, ready };
            self.started[j] += 1;
            let job = &self.jobs[j];
            self.result.placements.push(Placement {
                job: job.id,
                task: job.tasks[t].id,
                cluster: a.cluster,
                ready,
                start: now,
                finish: a.finish,
                bid: a.bid.value,
            });
            self.log(now, LogKind::Start, a.task, Some(a.cluster), Some(a.bid.value));
            self.push(a.finish, EventKind::TaskFinish, a.task);
        }
    }
}
