//! Tasks, jobs and the DAG analytics derived from them at load time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::curve::ValueCurve;
use crate::error::ModelError;

/// Discrete simulation time.
pub type Tick = u64;

/// Architecture label shared by tasks and clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Kind(pub u8);

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Kind{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A task as it appears in a workload file, before any derivation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub exec: u64,
    pub cores: u32,
    pub kind: Kind,
    #[serde(default)]
    pub deps: Vec<TaskId>,
}

/// A job as it appears in a workload file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: JobId,
    pub arrive: Tick,
    pub vmax: f64,
    pub curve: ValueCurve,
    pub tasks: Vec<TaskSpec>,
}

/// A validated task with its derived graph data. Dependencies are held as
/// indices into the owning job's task list.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub exec: u64,
    pub cores: u32,
    pub kind: Kind,
    pub deps: Vec<usize>,
    pub succs: Vec<usize>,
    pub upward_rank: u64,
    /// Own resource plus that of every distinct transitive successor.
    pub succ_sum: u64,
    /// Own resource plus the literal recursive sum over successors, which
    /// counts shared descendants once per path.
    pub succ_sum_recursive: u64,
}

impl Task {
    pub fn work(&self) -> u64 {
        self.exec * u64::from(self.cores)
    }
}

/// A validated job. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub id: JobId,
    pub arrive: Tick,
    pub vmax: f64,
    pub curve: ValueCurve,
    /// Tasks sorted by ascending id.
    pub tasks: Vec<Task>,
    pub cp: u64,
    topo: Vec<usize>,
}

/// Inter-cluster transfer delay for data produced by a task running `exec` ticks.
///
/// Rounded up to whole ticks. Products that land within floating point noise of
/// an integer (e.g. `15 * 0.2`) are treated as that integer.
pub fn transfer_delay(exec: u64, ccr: f64) -> u64 {
    let raw = exec as f64 * ccr;
    if raw <= 0.0 {
        return 0;
    }
    let nearest = raw.round();
    if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        raw.ceil() as u64
    }
}

impl Job {
    /// Validates a job description and derives ranks, critical path and
    /// resource sums. `ccr` prices mixed-kind edges in the rank estimate.
    pub fn new(spec: JobSpec, ccr: f64) -> Result<Self, ModelError> {
        let JobSpec { id, arrive, vmax, curve, mut tasks } = spec;
        if tasks.is_empty() {
            return Err(ModelError::EmptyJob(id));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(ModelError::BadVmax { job: id, vmax });
        }
        tasks.sort_by_key(|t| t.id);
        let mut index = BTreeMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if index.insert(t.id, i).is_some() {
                return Err(ModelError::DuplicateTask { job: id, task: t.id });
            }
            if t.exec == 0 || t.cores == 0 {
                return Err(ModelError::ZeroSizedTask { job: id, task: t.id });
            }
        }

        let n = tasks.len();
        let mut deps = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, t) in tasks.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for d in &t.deps {
                let &j = index.get(d).ok_or(ModelError::UnknownDependency {
                    job: id,
                    task: t.id,
                    dep: *d,
                })?;
                if seen.insert(j) {
                    deps[i].push(j);
                    succs[j].push(i);
                }
            }
        }

        let topo = topo_order_indices(&deps, &succs).map_err(|(from, to)| ModelError::Cycle {
            job: id,
            from: tasks[from].id,
            to: tasks[to].id,
        })?;

        let execs: Vec<u64> = tasks.iter().map(|t| t.exec).collect();
        let kinds: Vec<Kind> = tasks.iter().map(|t| t.kind).collect();
        let ranks = upward_ranks(&topo, &succs, &execs, |u, v| {
            if kinds[u] == kinds[v] {
                0
            } else {
                transfer_delay(execs[u], ccr)
            }
        });
        let work: Vec<u64> = tasks.iter().map(|t| t.exec * u64::from(t.cores)).collect();
        let (set_sums, rec_sums) = successor_sums(&topo, &succs, &work);
        let cp = ranks.iter().copied().max().unwrap_or(0);

        let tasks = tasks
            .into_iter()
            .enumerate()
            .map(|(i, t)| Task {
                id: t.id,
                exec: t.exec,
                cores: t.cores,
                kind: t.kind,
                deps: std::mem::take(&mut deps[i]),
                succs: std::mem::take(&mut succs[i]),
                upward_rank: ranks[i],
                succ_sum: set_sums[i],
                succ_sum_recursive: rec_sums[i],
            })
            .collect();

        Ok(Job { id, arrive, vmax, curve, tasks, cp, topo })
    }

    /// Task ids in dependency order, ties broken by ascending id.
    pub fn topo_order(&self) -> Vec<TaskId> {
        self.topo.iter().map(|&i| self.tasks[i].id).collect()
    }

    pub fn critical_path(&self) -> u64 {
        self.cp
    }

    pub fn upward_rank(&self, task: TaskId) -> Option<u64> {
        self.task_index(task).map(|i| self.tasks[i].upward_rank)
    }

    pub fn task_index(&self, task: TaskId) -> Option<usize> {
        self.tasks.binary_search_by_key(&task, |t| t.id).ok()
    }

    /// Total core-ticks consumed by the job.
    pub fn total_work(&self) -> u64 {
        self.tasks.iter().map(Task::work).sum()
    }

    /// Absolute final deadline in (real-valued) ticks.
    pub fn deadline(&self) -> f64 {
        self.arrive as f64 + self.curve.d_final() * self.cp as f64
    }

    /// Back to the serializable form.
    pub fn to_spec(&self) -> JobSpec {
        JobSpec {
            id: self.id,
            arrive: self.arrive,
            vmax: self.vmax,
            curve: self.curve.clone(),
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskSpec {
                    id: t.id,
                    exec: t.exec,
                    cores: t.cores,
                    kind: t.kind,
                    deps: t.deps.iter().map(|&d| self.tasks[d].id).collect(),
                })
                .collect(),
        }
    }

    pub fn with_arrival(mut self, arrive: Tick) -> Self {
        self.arrive = arrive;
        self
    }
}

/// Kahn's algorithm over index graphs, always releasing the lowest ready index.
/// Since tasks are sorted by id this is the ascending-id tie-break. On a cycle,
/// returns one edge `(from, to)` that lies on it.
pub(crate) fn topo_order_indices(
    deps: &[Vec<usize>],
    succs: &[Vec<usize>],
) -> Result<Vec<usize>, (usize, usize)> {
    let n = deps.len();
    let mut indeg: Vec<usize> = deps.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover node has a leftover predecessor, so walking backwards
    // from any of them must revisit a node.
    let start = (0..n).find(|&i| indeg[i] > 0).expect("leftover node");
    let mut pos = vec![usize::MAX; n];
    let mut path = vec![start];
    pos[start] = 0;
    let mut cur = start;
    loop {
        let pred = *deps[cur]
            .iter()
            .find(|&&p| indeg[p] > 0)
            .expect("leftover node has leftover predecessor");
        if pos[pred] != usize::MAX {
            return Err((pred, cur));
        }
        pos[pred] = path.len();
        path.push(pred);
        cur = pred;
    }
}

/// Upward ranks over a topological order: sinks get their own exec, every
/// other task adds the most expensive successor route including edge cost.
pub(crate) fn upward_ranks(
    topo: &[usize],
    succs: &[Vec<usize>],
    execs: &[u64],
    comm: impl Fn(usize, usize) -> u64,
) -> Vec<u64> {
    let mut rank = vec![0u64; execs.len()];
    for &u in topo.iter().rev() {
        let tail = succs[u].iter().map(|&v| comm(u, v) + rank[v]).max().unwrap_or(0);
        rank[u] = execs[u] + tail;
    }
    rank
}

fn successor_sums(topo: &[usize], succs: &[Vec<usize>], work: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let n = work.len();
    let mut recursive = vec![0u64; n];
    let mut reach: Vec<Vec<bool>> = vec![Vec::new(); n];
    for &u in topo.iter().rev() {
        let mut mine = vec![false; n];
        mine[u] = true;
        let mut rec = work[u];
        for &v in &succs[u] {
            rec = rec.saturating_add(recursive[v]);
            for (m, r) in mine.iter_mut().zip(&reach[v]) {
                *m |= *r;
            }
        }
        recursive[u] = rec;
        reach[u] = mine;
    }
    let set = reach
        .iter()
        .map(|r| r.iter().zip(work).filter(|(&b, _)| b).map(|(_, &w)| w).sum())
        .collect();
    (set, recursive)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn ids(v: &[u32]) -> Vec<TaskId> {
        v.iter().map(|&i| TaskId(i)).collect()
    }

    #[test]
    fn topo_single_chain_and_diamond() {
        let single = Job::new(job(0, 0, vec![task(1, 5, 1, 1, &[])]), 0.2).unwrap();
        assert_eq!(single.topo_order(), ids(&[1]));

        let chain = Job::new(
            job(0, 0, vec![task(3, 1, 1, 1, &[2]), task(1, 1, 1, 1, &[]), task(2, 1, 1, 1, &[1])]),
            0.2,
        )
        .unwrap();
        assert_eq!(chain.topo_order(), ids(&[1, 2, 3]));

        // a=1, b=2, c=3, d=4
        let diamond = Job::new(
            job(
                0,
                0,
                vec![
                    task(4, 1, 1, 1, &[3, 2]),
                    task(3, 1, 1, 1, &[1]),
                    task(2, 1, 1, 1, &[1]),
                    task(1, 1, 1, 1, &[]),
                ],
            ),
            0.2,
        )
        .unwrap();
        assert_eq!(diamond.topo_order(), ids(&[1, 2, 3, 4]));
    }

    #[test]
    fn cycle_is_rejected_with_an_edge_on_it() {
        let err = Job::new(
            job(7, 0, vec![task(0, 1, 1, 1, &[]), task(1, 1, 1, 1, &[0, 2]), task(2, 1, 1, 1, &[1])]),
            0.0,
        )
        .unwrap_err();
        match err {
            ModelError::Cycle { job, from, to } => {
                assert_eq!(job, JobId(7));
                let edge = (from.0, to.0);
                assert!(edge == (1, 2) || edge == (2, 1), "{edge:?}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = Job::new(job(0, 0, vec![task(0, 1, 1, 1, &[0])]), 0.0).unwrap_err();
        assert!(matches!(err, ModelError::Cycle { from: TaskId(0), to: TaskId(0), .. }));
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            Job::new(job(0, 0, vec![]), 0.0),
            Err(ModelError::EmptyJob(_))
        ));
        assert!(matches!(
            Job::new(job(0, 0, vec![task(0, 0, 1, 1, &[])]), 0.0),
            Err(ModelError::ZeroSizedTask { .. })
        ));
        assert!(matches!(
            Job::new(job(0, 0, vec![task(0, 1, 1, 1, &[]), task(0, 1, 1, 1, &[])]), 0.0),
            Err(ModelError::DuplicateTask { .. })
        ));
        assert!(matches!(
            Job::new(job(0, 0, vec![task(0, 1, 1, 1, &[9])]), 0.0),
            Err(ModelError::UnknownDependency { .. })
        ));
        let mut spec = job(0, 0, vec![task(0, 1, 1, 1, &[])]);
        spec.vmax = 0.0;
        assert!(matches!(Job::new(spec, 0.0), Err(ModelError::BadVmax { .. })));
    }

    #[test]
    fn upward_rank_examples() {
        let sink = Job::new(job(0, 0, vec![task(0, 10, 1, 1, &[])]), 0.2).unwrap();
        assert_eq!(sink.upward_rank(TaskId(0)), Some(10));
        assert_eq!(sink.critical_path(), 10);

        let same = Job::new(job(0, 0, vec![task(0, 10, 1, 1, &[]), task(1, 20, 1, 1, &[0])]), 0.2)
            .unwrap();
        assert_eq!(same.upward_rank(TaskId(0)), Some(30));
        assert_eq!(same.upward_rank(TaskId(1)), Some(20));

        let mixed = Job::new(job(0, 0, vec![task(0, 10, 1, 1, &[]), task(1, 20, 1, 2, &[0])]), 0.2)
            .unwrap();
        assert_eq!(mixed.upward_rank(TaskId(0)), Some(32));
        assert_eq!(mixed.critical_path(), 32);

        let parallel =
            Job::new(job(0, 0, vec![task(0, 10, 1, 1, &[]), task(1, 25, 1, 2, &[])]), 0.2).unwrap();
        assert_eq!(parallel.critical_path(), 25);
    }

    #[test]
    fn transfer_delay_rounding() {
        assert_eq!(transfer_delay(10, 0.2), 2);
        assert_eq!(transfer_delay(15, 0.2), 3);
        assert_eq!(transfer_delay(11, 0.2), 3);
        assert_eq!(transfer_delay(1, 0.2), 1);
        assert_eq!(transfer_delay(100, 0.0), 0);
    }

    #[test]
    fn succ_sum_examples() {
        let sink = Job::new(job(0, 0, vec![task(0, 5, 4, 1, &[])]), 0.0).unwrap();
        assert_eq!(sink.tasks[0].succ_sum, 20);

        let pair = Job::new(job(0, 0, vec![task(0, 10, 2, 1, &[]), task(1, 5, 4, 1, &[0])]), 0.0)
            .unwrap();
        assert_eq!(pair.tasks[0].succ_sum, 40);

        let diamond = Job::new(
            job(
                0,
                0,
                vec![
                    task(0, 1, 1, 1, &[]),
                    task(1, 2, 1, 1, &[0]),
                    task(2, 3, 1, 1, &[0]),
                    task(3, 4, 1, 1, &[1, 2]),
                ],
            ),
            0.0,
        )
        .unwrap();
        assert_eq!(diamond.tasks[0].succ_sum, 10);
        assert_eq!(diamond.tasks[0].succ_sum_recursive, 14);
    }

    #[test]
    fn spec_round_trip_preserves_structure() {
        let spec = job(3, 11, vec![task(0, 10, 2, 1, &[]), task(1, 5, 4, 2, &[0])]);
        let j = Job::new(spec.clone(), 0.2).unwrap();
        assert_eq!(j.to_spec(), spec);
        assert_eq!(j.total_work(), 40);
        assert!((j.deadline() - (11.0 + 6.0 * 17.0)).abs() < 1e-12);
    }
}
