use std::collections::{BTreeSet, VecDeque};

use bidsim::error::ModelError;
use bidsim::workload::gen_job;
use bidsim::{GenConfig, Job, JobId, JobSpec, TaskId, ValueCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_curve(rng: &mut ChaCha8Rng) -> ValueCurve {
    let d_initial = rng.random_range(1.0..4.0);
    let d_final = d_initial + rng.random_range(0.5..8.0);
    let k = rng.random_range(0..10);
    let mut slrs: Vec<f64> = (0..k).map(|_| rng.random_range(d_initial..d_final)).filter(|&s| s > d_initial).collect();
    slrs.sort_by(f64::total_cmp);
    slrs.dedup();
    let mut factors: Vec<f64> = slrs.iter().map(|_| rng.random::<f64>()).collect();
    factors.sort_by(|a, b| b.total_cmp(a));
    ValueCurve::new(d_initial, d_final, slrs.into_iter().zip(factors).collect()).unwrap()
}

fn midpoint_area(curve: &ValueCurve, vmax: f64, from: f64) -> f64 {
    let lo = from.max(1.0);
    let hi = curve.d_final();
    if lo >= hi {
        return 0.0;
    }
    // composite midpoint rule with cells that never straddle a breakpoint
    let mut cuts: Vec<f64> = curve.points().iter().map(|p| p.0).filter(|&t| t > lo && t < hi).collect();
    cuts.insert(0, lo);
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| {
            let n = ((w[1] - w[0]) / 1e-4).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / n as f64;
            (0..n).map(|i| curve.value(vmax, w[0] + (i as f64 + 0.5) * h)).sum::<f64>() * h
        })
        .sum()
}

/// Compares the closed-form remaining area with a numerical integral of
/// `value` on `n` random curves; returns the worst relative error.
pub fn check_remaining_area(n: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let curve = random_curve(&mut rng);
        let vmax = rng.random_range(1.0..1e6);
        let from = rng.random_range(0.5..curve.d_final() - 0.01);
        let exact = curve.remaining_area(vmax, from);
        let numeric = midpoint_area(&curve, vmax, from);
        let rel = (exact - numeric).abs() / numeric.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        assert!(rel <= 1e-6, "curve {curve:?} vmax {vmax} from {from}: {exact} vs {numeric}");
    }
    worst
}

pub fn dag_config(tasks: [u32; 2]) -> GenConfig {
    GenConfig { tasks_per_job: tasks, ..GenConfig::default() }
}

/// Kahn's algorithm with an explicit ready list scanned for the smallest id.
fn reference_topo(spec: &JobSpec) -> Option<Vec<TaskId>> {
    let ids: Vec<TaskId> = spec.tasks.iter().map(|t| t.id).collect();
    let mut indeg: Vec<usize> =
        spec.tasks.iter().map(|t| t.deps.iter().collect::<BTreeSet<_>>().len()).collect();
    let mut done = vec![false; ids.len()];
    let mut out = Vec::new();
    while out.len() < ids.len() {
        let next = (0..ids.len()).filter(|&i| !done[i] && indeg[i] == 0).min_by_key(|&i| ids[i])?;
        done[next] = true;
        out.push(ids[next]);
        for (i, t) in spec.tasks.iter().enumerate() {
            if t.deps.iter().collect::<BTreeSet<_>>().contains(&ids[next]) {
                indeg[i] -= 1;
            }
        }
    }
    Some(out)
}

fn reaches(spec: &JobSpec, from: TaskId, to: TaskId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if !seen.insert(u) {
            continue;
        }
        stack.extend(spec.tasks.iter().filter(|t| t.deps.contains(&u)).map(|t| t.id));
    }
    false
}

fn weakly_connected(spec: &JobSpec) -> bool {
    let mut seen = BTreeSet::from([spec.tasks[0].id]);
    let mut queue = VecDeque::from([spec.tasks[0].id]);
    while let Some(u) = queue.pop_front() {
        for t in &spec.tasks {
            let nbr = if t.id == u {
                t.deps.clone()
            } else if t.deps.contains(&u) {
                vec![t.id]
            } else {
                vec![]
            };
            for v in nbr {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
    }
    seen.len() == spec.tasks.len()
}

/// Checks `n` generated DAGs for connectivity and reference topological
/// order, and a cyclic variant of each for rejection; returns the number of
/// cyclic variants tried.
pub fn check_dags(count: u32) -> usize {
    let cfg = dag_config([1, 20]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cycles = 0;
    for n in 0..count {
        let spec = gen_job(&cfg, &mut rng, JobId(n), |_| None);
        assert!(weakly_connected(&spec), "job {n} is disconnected");
        let job = Job::new(spec.clone(), 0.2).expect("generated DAG is valid");
        assert_eq!(Some(job.topo_order()), reference_topo(&spec));
        let pos: Vec<usize> = {
            let order = job.topo_order();
            spec.tasks.iter().map(|t| order.iter().position(|&o| o == t.id).unwrap()).collect()
        };
        for (i, t) in spec.tasks.iter().enumerate() {
            for d in &t.deps {
                let di = spec.tasks.iter().position(|x| x.id == *d).unwrap();
                assert!(pos[di] < pos[i]);
            }
        }

        // close a loop: some task now also waits on one of its descendants
        if spec.tasks.len() < 2 {
            continue;
        }
        let mut bad = spec.clone();
        let a = rng.random_range(0..bad.tasks.len());
        let b = rng.random_range(0..bad.tasks.len());
        let (ta, tb) = (bad.tasks[a].id, bad.tasks[b].id);
        if !reaches(&bad, ta, tb) {
            continue;
        }
        bad.tasks[a].deps.push(tb);
        cycles += 1;
        assert_eq!(reference_topo(&bad), None);
        match Job::new(bad.clone(), 0.2) {
            Err(ModelError::Cycle { from, to, .. }) => {
                let edge = bad.tasks.iter().any(|t| t.id == to && t.deps.contains(&from));
                assert!(edge, "reported edge {from}->{to} does not exist");
                assert!(reaches(&bad, to, from), "reported edge {from}->{to} is not on a cycle");
            }
            other => panic!("cycle not rejected: {other:?}"),
        }
    }
    cycles
}
