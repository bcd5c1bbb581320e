//! Kinded clusters behind a central router.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PlatformError;
use crate::model::{transfer_delay, Job, JobId, Kind, TaskId, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub usize);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub kind: Kind,
    pub cores: u32,
}

/// Platform description as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformSpec {
    pub clusters: Vec<ClusterSpec>,
    pub ccr: f64,
}

impl PlatformSpec {
    /// `n_kind1` clusters of Kind1 followed by `n_kind2` of Kind2, all `cores` wide.
    pub fn uniform(n_kind1: usize, n_kind2: usize, cores: u32, ccr: f64) -> Self {
        let clusters = std::iter::repeat_n(Kind(1), n_kind1)
            .chain(std::iter::repeat_n(Kind(2), n_kind2))
            .map(|kind| ClusterSpec { kind, cores })
            .collect();
        PlatformSpec { clusters, ccr }
    }

    pub fn total_cores(&self) -> u64 {
        self.clusters.iter().map(|c| u64::from(c.cores)).sum()
    }

    /// Smallest cluster width for `kind`, if any cluster has it.
    pub fn smallest(&self, kind: Kind) -> Option<u32> {
        self.clusters.iter().filter(|c| c.kind == kind).map(|c| c.cores).min()
    }

    pub fn largest(&self, kind: Kind) -> Option<u32> {
        self.clusters.iter().filter(|c| c.kind == kind).map(|c| c.cores).max()
    }

    pub fn validate(&self) -> Result<(), PlatformError> {
        if self.clusters.is_empty() {
            return Err(PlatformError::Empty);
        }
        if let Some(i) = self.clusters.iter().position(|c| c.cores == 0) {
            return Err(PlatformError::ZeroCores(i));
        }
        if !(self.ccr.is_finite() && self.ccr >= 0.0) {
            return Err(PlatformError::Ccr(self.ccr));
        }
        Ok(())
    }

    /// Every task must have a cluster of its kind wide enough to hold it.
    pub fn check_jobs<'a>(&self, jobs: impl IntoIterator<Item = &'a Job>) -> Result<(), PlatformError> {
        for job in jobs {
            for t in &job.tasks {
                match self.largest(t.kind) {
                    None => {
                        return Err(PlatformError::MissingKind { job: job.id, task: t.id, kind: t.kind })
                    }
                    Some(largest) if largest < t.cores => {
                        return Err(PlatformError::TaskTooWide {
                            job: job.id,
                            task: t.id,
                            kind: t.kind,
                            cores: t.cores,
                            largest,
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        Ok(())
    }
}

impl Default for PlatformSpec {
    /// Three Kind1 clusters and one Kind2 cluster of 1000 cores, CCR 0.2.
    fn default() -> Self {
        PlatformSpec::uniform(3, 1, 1000, 0.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Running {
    pub finish: Tick,
    pub cores: u32,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub id: ClusterId,
    pub kind: Kind,
    pub total_cores: u32,
    free_cores: u32,
    running: BTreeMap<(JobId, TaskId), Running>,
}

impl Cluster {
    pub fn new(id: ClusterId, kind: Kind, total_cores: u32) -> Self {
        Cluster { id, kind, total_cores, free_cores: total_cores, running: BTreeMap::new() }
    }

    pub fn free_cores(&self) -> u32 {
        self.free_cores
    }

    pub fn running(&self) -> &BTreeMap<(JobId, TaskId), Running> {
        &self.running
    }

    pub fn fits(&self, kind: Kind, cores: u32) -> bool {
        self.kind == kind && self.free_cores >= cores
    }

    /// Starts a task immediately and returns its finish tick.
    ///
    /// Panics on kind mismatch or insufficient cores; the auctioneer only
    /// ever places onto clusters that declared enough free cores.
    pub fn place(&mut self, job: JobId, task: TaskId, kind: Kind, cores: u32, exec: u64, now: Tick) -> Tick {
        assert_eq!(kind, self.kind, "task {job}/{task} of {kind} placed on {} cluster {}", self.kind, self.id);
        assert!(
            cores <= self.free_cores,
            "task {job}/{task} needs {cores} cores, cluster {} has {} free",
            self.id,
            self.free_cores
        );
        let finish = now + exec;
        self.free_cores -= cores;
        let prev = self.running.insert((job, task), Running { finish, cores });
        assert!(prev.is_none(), "task {job}/{task} placed twice");
        finish
    }

    /// Releases the cores of a finished task.
    pub fn release(&mut self, job: JobId, task: TaskId) -> Running {
        let r = self
            .running
            .remove(&(job, task))
            .unwrap_or_else(|| panic!("task {job}/{task} not running on cluster {}", self.id));
        self.free_cores += r.cores;
        debug_assert_eq!(
            self.free_cores + self.running.values().map(|r| r.cores).sum::<u32>(),
            self.total_cores
        );
        r
    }
}

#[derive(Debug, Clone)]
pub struct Platform {
    pub clusters: Vec<Cluster>,
    pub ccr: f64,
}

impl Platform {
    pub fn new(spec: &PlatformSpec) -> Result<Self, PlatformError> {
        spec.validate()?;
        let clusters = spec
            .clusters
            .iter()
            .enumerate()
            .map(|(i, c)| Cluster::new(ClusterId(i), c.kind, c.cores))
            .collect();
        Ok(Platform { clusters, ccr: spec.ccr })
    }

    /// Matching cluster with the most free cores that can hold `cores`,
    /// lowest id on ties.
    pub fn best_fit(&self, kind: Kind, cores: u32) -> Option<ClusterId> {
        self.clusters
            .iter()
            .filter(|c| c.fits(kind, cores))
            .max_by(|a, b| a.free_cores.cmp(&b.free_cores).then(b.id.cmp(&a.id)))
            .map(|c| c.id)
    }

    pub fn cluster(&self, id: ClusterId) -> &Cluster {
        &self.clusters[id.0]
    }

    pub fn cluster_mut(&mut self, id: ClusterId) -> &mut Cluster {
        &mut self.clusters[id.0]
    }
}

/// Where and when a dependency finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepDone {
    pub finish: Tick,
    pub cluster: ClusterId,
    pub exec: u64,
}

/// Tick at which all dependency data is present on `target`.
pub fn data_ready_at(deps: &[DepDone], target: ClusterId, arrive: Tick, ccr: f64) -> Tick {
    deps.iter()
        .map(|d| d.finish + if d.cluster == target { 0 } else { transfer_delay(d.exec, ccr) })
        .max()
        .unwrap_or(arrive)
}

/// Tick at which a task joins the global ready queue.
///
/// If every dependency ran on one cluster that can also host the task, no
/// transfer is charged. Otherwise every dependency's output is broadcast
/// through the router and the task waits for the slowest copy.
pub fn queue_ready_at(deps: &[DepDone], kind: Kind, arrive: Tick, platform: &Platform) -> Tick {
    let Some(first) = deps.first() else {
        return arrive;
    };
    let co_located = deps.iter().all(|d| d.cluster == first.cluster)
        && platform.cluster(first.cluster).kind == kind;
    if co_located {
        deps.iter().map(|d| d.finish).max().unwrap_or(arrive)
    } else {
        deps.iter().map(|d| d.finish + transfer_delay(d.exec, platform.ccr)).max().unwrap_or(arrive)
    }
}
