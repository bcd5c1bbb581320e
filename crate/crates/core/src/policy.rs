//! Bidding policies. Each maps a ready task, its job and the instant's queue
//! context to a number; the policy's [`Sense`] says whether low or high wins.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Job, JobId, Task, TaskId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Random,
    Fifo,
    Srtf,
    Lrtf,
    Pslr,
    Edf,
    Pv,
    Pvd,
    Pvdsq,
    Pvr,
}

impl Policy {
    pub const ALL: [Policy; 10] = [
        Policy::Random,
        Policy::Fifo,
        Policy::Srtf,
        Policy::Lrtf,
        Policy::Pslr,
        Policy::Edf,
        Policy::Pv,
        Policy::Pvd,
        Policy::Pvdsq,
        Policy::Pvr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Random => "random",
            Policy::Fifo => "fifo",
            Policy::Srtf => "srtf",
            Policy::Lrtf => "lrtf",
            Policy::Pslr => "pslr",
            Policy::Edf => "edf",
            Policy::Pv => "pv",
            Policy::Pvd => "pvd",
            Policy::Pvdsq => "pvdsq",
            Policy::Pvr => "pvr",
        }
    }

    pub fn sense(self) -> Sense {
        match self {
            Policy::Fifo | Policy::Srtf | Policy::Edf | Policy::Pvr => Sense::LowestWins,
            Policy::Random
            | Policy::Lrtf
            | Policy::Pslr
            | Policy::Pv
            | Policy::Pvd
            | Policy::Pvdsq => Sense::HighestWins,
        }
    }

    /// Whether bids change with the current tick or queue composition.
    pub fn is_time_dependent(self) -> bool {
        matches!(self, Policy::Random | Policy::Pslr | Policy::Pv | Policy::Pvd | Policy::Pvdsq | Policy::Pvr)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy `{0}` (expected one of random|fifo|srtf|lrtf|pslr|edf|pv|pvd|pvdsq|pvr)")]
pub struct UnknownPolicy(pub String);

impl FromStr for Policy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    LowestWins,
    HighestWins,
}

/// Which resource sum PVD and PVDSQ divide by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccSumMode {
    /// Each distinct transitive successor counted once.
    #[default]
    DistinctSuccessors,
    /// Literal recursion; shared descendants counted once per path.
    Recursive,
}

/// Which point of the value curve EDF treats as the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdfDeadline {
    /// Where value reaches zero and the job starves.
    #[default]
    Final,
    /// Where value starts to decay.
    Initial,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PolicyOptions {
    #[serde(default)]
    pub succ_sum: SuccSumMode,
    #[serde(default)]
    pub edf_deadline: EdfDeadline,
}

/// Per-instant inputs shared by every bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueContext {
    pub now: Tick,
    /// Largest critical path among jobs with a task in the queue.
    pub max_cp_in_queue: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bid {
    pub value: f64,
    pub sense: Sense,
    pub tiebreak: (Tick, JobId, TaskId),
}

impl Bid {
    /// `Less` means `self` is served first.
    pub fn priority_cmp(&self, other: &Bid) -> Ordering {
        debug_assert_eq!(self.sense, other.sense);
        let by_value = match self.sense {
            Sense::LowestWins => self.value.total_cmp(&other.value),
            Sense::HighestWins => other.value.total_cmp(&self.value),
        };
        by_value.then(self.tiebreak.cmp(&other.tiebreak))
    }
}

/// Projected SLR if `task` ran now and its job finished one upward rank later.
pub fn p_slr(task: &Task, job: &Job, now: Tick) -> f64 {
    ((task.upward_rank + now) as f64 - job.arrive as f64) / job.cp as f64
}

pub fn bid_fifo(job: &Job) -> f64 {
    job.arrive as f64
}

pub fn bid_rank(task: &Task) -> f64 {
    task.upward_rank as f64
}

pub fn bid_pslr(task: &Task, job: &Job, ctx: &QueueContext) -> f64 {
    let now = ctx.now as f64;
    let arrive = job.arrive as f64;
    let base = (task.upward_rank as f64 + now + 1.0 - arrive) / job.cp as f64;
    let waited = ((now - arrive) / ctx.max_cp_in_queue.max(1) as f64).floor();
    base + waited * waited
}

/// Absolute deadline in ticks.
pub fn bid_edf(job: &Job, deadline: EdfDeadline) -> f64 {
    match deadline {
        EdfDeadline::Final => job.deadline(),
        EdfDeadline::Initial => job.arrive as f64 + job.curve.d_initial() * job.cp as f64,
    }
}

pub fn bid_pv(task: &Task, job: &Job, now: Tick) -> f64 {
    // a task off the critical path can project below 1; value is flat there
    job.curve.value(job.vmax, p_slr(task, job, now).max(1.0))
}

pub fn succ_sum(task: &Task, mode: SuccSumMode) -> u64 {
    match mode {
        SuccSumMode::DistinctSuccessors => task.succ_sum,
        SuccSumMode::Recursive => task.succ_sum_recursive,
    }
}

pub fn bid_pvd(task: &Task, job: &Job, now: Tick, mode: SuccSumMode) -> f64 {
    bid_pv(task, job, now) / succ_sum(task, mode) as f64
}

pub fn bid_pvdsq(task: &Task, job: &Job, now: Tick, mode: SuccSumMode) -> f64 {
    bid_pvd(task, job, now, mode).powi(2)
}

pub fn bid_pvr(task: &Task, job: &Job, now: Tick) -> f64 {
    job.curve.remaining_area(job.vmax, p_slr(task, job, now))
}

const RANDOM_BID_STREAM_SALT: u64 = 0x5eed_b1d5_0000_0001;

/// Uniform draw in [0, 1), fresh per (seed, instant, task).
///
/// Each task owns a ChaCha stream keyed by its ids and each tick owns one
/// 64-bit word pair, so bids are reproducible and can be computed in any order.
pub fn bid_random(job: JobId, task: TaskId, now: Tick, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RANDOM_BID_STREAM_SALT);
    rng.set_stream((u64::from(job.0) << 32) | u64::from(task.0));
    rng.set_word_pos(u128::from(now) * 2);
    rng.random::<f64>()
}

impl Policy {
    /// Bid of task `task_index` of `job` at this instant.
    pub fn bid(self, job: &Job, task_index: usize, ctx: &QueueContext, opts: &PolicyOptions) -> Bid {
        let task = &job.tasks[task_index];
        let value = match self {
            Policy::Random => bid_random(job.id, task.id, ctx.now, ctx.seed),
            Policy::Fifo => bid_fifo(job),
            Policy::Srtf | Policy::Lrtf => bid_rank(task),
            Policy::Pslr => bid_pslr(task, job, ctx),
            Policy::Edf => bid_edf(job, opts.edf_deadline),
            Policy::Pv => bid_pv(task, job, ctx.now),
            Policy::Pvd => bid_pvd(task, job, ctx.now, opts.succ_sum),
            Policy::Pvdsq => bid_pvdsq(task, job, ctx.now, opts.succ_sum),
            Policy::Pvr => bid_pvr(task, job, ctx.now),
        };
        Bid { value, sense: self.sense(), tiebreak: (job.arrive, job.id, task.id) }
    }
}
