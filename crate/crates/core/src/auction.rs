//! Market clearing at a scheduling instant.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{Job, Kind, Tick};
use crate::platform::{ClusterId, Platform};
use crate::policy::{Bid, Policy, PolicyOptions, QueueContext};

/// A task by position: `(job index, task index)` into the run's job list.
pub type TaskRef = (usize, usize);

/// Tasks whose data has arrived and whose job is still live.
#[derive(Debug, Clone, Default)]
pub struct ReadyQueue {
    entries: BTreeSet<TaskRef>,
}

impl ReadyQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: TaskRef) {
        let fresh = self.entries.insert(t);
        assert!(fresh, "task {t:?} queued twice");
    }

    pub fn remove(&mut self, t: &TaskRef) -> bool {
        self.entries.remove(t)
    }

    /// Drops every queued task of job `job`, returning how many were removed.
    pub fn remove_job(&mut self, job: usize) -> usize {
        let doomed: Vec<TaskRef> = self.entries.range((job, 0)..(job + 1, 0)).copied().collect();
        for t in &doomed {
            self.entries.remove(t);
        }
        doomed.len()
    }

    pub fn contains(&self, t: &TaskRef) -> bool {
        self.entries.contains(t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskRef> {
        self.entries.iter()
    }

    /// Largest critical path among jobs with a queued task.
    pub fn max_cp(&self, jobs: &[Job]) -> u64 {
        self.entries.iter().map(|&(j, _)| jobs[j].cp).max().unwrap_or(0)
    }
}

/// What to do when the top bidder cannot be placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingMode {
    /// Stop the whole auction.
    #[default]
    Global,
    /// Stop only for that task's kind; other kinds keep clearing.
    PerKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub task: TaskRef,
    pub cluster: ClusterId,
    pub bid: Bid,
    pub finish: Tick,
}

/// Every queued task's bid, best first.
pub fn ranked_bids(
    queue: &ReadyQueue,
    jobs: &[Job],
    policy: Policy,
    ctx: &QueueContext,
    opts: &PolicyOptions,
) -> Vec<(TaskRef, Bid)> {
    let mut bids: Vec<(TaskRef, Bid)> =
        queue.iter().map(|&(j, t)| ((j, t), policy.bid(&jobs[j], t, ctx, opts))).collect();
    bids.sort_by(|a, b| a.1.priority_cmp(&b.1));
    bids
}

/// Runs one auction: bids are taken once, then the best remaining bidder goes
/// to the matching cluster with most free cores until the queue empties or the
/// top bidder does not fit anywhere. Lower bidders never jump a blocked one.
///
/// Placed tasks leave the queue and hold their cores on the platform.
pub fn clear(
    queue: &mut ReadyQueue,
    jobs: &[Job],
    platform: &mut Platform,
    policy: Policy,
    ctx: &QueueContext,
    opts: &PolicyOptions,
    mode: ClearingMode,
) -> Vec<Assignment> {
    let mut out = Vec::new();
    let mut blocked: BTreeSet<Kind> = BTreeSet::new();
    for (tref, bid) in ranked_bids(queue, jobs, policy, ctx, opts) {
        let job = &jobs[tref.0];
        let task = &job.tasks[tref.1];
        if blocked.contains(&task.kind) {
            continue;
        }
        match platform.best_fit(task.kind, task.cores) {
            Some(cid) => {
                let finish =
                    platform.cluster_mut(cid).place(job.id, task.id, task.kind, task.cores, task.exec, ctx.now);
                queue.remove(&tref);
                out.push(Assignment { task: tref, cluster: cid, bid, finish });
            }
            None => match mode {
                ClearingMode::Global => break,
                ClearingMode::PerKind => {
                    blocked.insert(task.kind);
                }
            },
        }
    }
    out
}

/// First integer tick strictly after the job's final deadline.
pub fn starvation_tick(job: &Job) -> Tick {
    job.deadline().floor() as Tick + 1
}

pub fn is_starved(job: &Job, now: Tick) -> bool {
    now as f64 > job.deadline()
}
