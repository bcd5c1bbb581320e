//! A deliberately naive tick-by-tick simulator used as an oracle for the
//! event-driven engine on tiny instances.

use bidsim::model::transfer_delay;
use bidsim::platform::{ClusterId, ClusterSpec};
use bidsim::policy::{PolicyOptions, QueueContext};
use bidsim::{run, Job, JobId, JobSpec, Kind, PlatformSpec, Policy, SimOptions, TaskId, TaskSpec, Tick, ValueCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Status {
    Pending,
    Live,
    Done(Tick),
    Starved,
}

/// (job, task, cluster, start, finish, bid) in placement order, plus per-job status.
type Trace = (Vec<(JobId, TaskId, ClusterId, Tick, Tick, f64)>, Vec<Status>);

fn starve_at(job: &Job) -> Tick {
    let deadline = job.arrive as f64 + job.curve.d_final() * job.cp as f64;
    deadline.floor() as Tick + 1
}

fn reference(jobs: &[Job], platform: &PlatformSpec, policy: Policy, seed: u64) -> Trace {
    let mut free: Vec<u32> = platform.clusters.iter().map(|c| c.cores).collect();
    let mut placed: Vec<Vec<Option<(ClusterId, Tick, Tick)>>> = jobs.iter().map(|j| vec![None; j.tasks.len()]).collect();
    let mut status = vec![Status::Pending; jobs.len()];
    let mut trace = Vec::new();

    let dep_info = |placed: &Vec<Vec<Option<(ClusterId, Tick, Tick)>>>, j: usize, t: usize, now: Tick| -> Option<(Tick, Tick)> {
        // (last dependency finish, queue-ready tick) once every dependency has finished by `now`
        let job = &jobs[j];
        let task = &job.tasks[t];
        if task.deps.is_empty() {
            return Some((job.arrive, job.arrive));
        }
        let mut done = Vec::new();
        for &d in &task.deps {
            match placed[j][d] {
                Some((c, _, f)) if f <= now => done.push((c, f, job.tasks[d].exec)),
                _ => return None,
            }
        }
        let last = done.iter().map(|x| x.1).max().unwrap();
        let same = done.iter().all(|x| x.0 == done[0].0) && platform.clusters[done[0].0 .0].kind == task.kind;
        let ready = if same { last } else { done.iter().map(|x| x.1 + transfer_delay(x.2, platform.ccr)).max().unwrap() };
        Some((last, ready))
    };

    let mut now: Tick = 0;
    loop {
        let mut effective = false;
        for (j, job) in jobs.iter().enumerate() {
            for t in 0..job.tasks.len() {
                if let Some((c, _, f)) = placed[j][t] {
                    if f == now {
                        free[c.0] += job.tasks[t].cores;
                        effective = true;
                    }
                }
            }
        }
        for (j, job) in jobs.iter().enumerate() {
            if status[j] == Status::Live {
                for t in 0..job.tasks.len() {
                    if placed[j][t].is_none() {
                        if let Some((last, ready)) = dep_info(&placed, j, t, now) {
                            effective |= ready == now && ready > last && !job.tasks[t].deps.is_empty();
                        }
                    }
                }
            }
            if status[j] == Status::Pending && job.arrive == now {
                status[j] = Status::Live;
                effective = true;
            }
            if status[j] == Status::Live && placed[j].iter().all(|p| matches!(p, Some((_, _, f)) if *f <= now)) {
                status[j] = Status::Done(now);
            }
        }
        for (j, job) in jobs.iter().enumerate() {
            if status[j] == Status::Live && starve_at(job) == now {
                status[j] = Status::Starved;
                effective = true;
            }
        }

        if effective {
            let mut queue = Vec::new();
            for (j, job) in jobs.iter().enumerate() {
                if status[j] != Status::Live {
                    continue;
                }
                for t in 0..job.tasks.len() {
                    if placed[j][t].is_none() && matches!(dep_info(&placed, j, t, now), Some((_, r)) if r <= now) {
                        queue.push((j, t));
                    }
                }
            }
            if !queue.is_empty() {
                let ctx = QueueContext {
                    now,
                    max_cp_in_queue: queue.iter().map(|&(j, _)| jobs[j].cp).max().unwrap(),
                    seed,
                };
                let mut bids: Vec<_> =
                    queue.iter().map(|&(j, t)| ((j, t), policy.bid(&jobs[j], t, &ctx, &PolicyOptions::default()))).collect();
                bids.sort_by(|a, b| a.1.priority_cmp(&b.1));
                for ((j, t), bid) in bids {
                    let task = &jobs[j].tasks[t];
                    let mut best: Option<usize> = None;
                    for (c, spec) in platform.clusters.iter().enumerate() {
                        if spec.kind == task.kind && free[c] >= task.cores && best.is_none_or(|b| free[c] > free[b]) {
                            best = Some(c);
                        }
                    }
                    let Some(c) = best else { break };
                    free[c] -= task.cores;
                    placed[j][t] = Some((ClusterId(c), now, now + task.exec));
                    trace.push((jobs[j].id, task.id, ClusterId(c), now, now + task.exec, bid.value));
                }
            }
        }

        let running = placed.iter().flatten().any(|p| matches!(p, Some((_, _, f)) if *f > now));
        let unresolved = status.iter().any(|s| matches!(s, Status::Pending | Status::Live));
        if !running && !unresolved {
            break;
        }
        now += 1;
        assert!(now < 1_000_000, "reference did not terminate");
    }
    (trace, status)
}

fn instance(rng: &mut ChaCha8Rng) -> (Vec<Job>, PlatformSpec) {
    let kinds = if rng.random_bool(0.5) { [Kind(1), Kind(2)] } else { [Kind(1), Kind(1)] };
    let clusters: Vec<ClusterSpec> = kinds.iter().map(|&kind| ClusterSpec { kind, cores: rng.random_range(2..=6) }).collect();
    let ccr = [0.0, 0.2, 0.5, 1.0][rng.random_range(0..4)];
    let platform = PlatformSpec { clusters: clusters.clone(), ccr };
    let cap = |k: Kind| clusters.iter().filter(|c| c.kind == k).map(|c| c.cores).min().unwrap();

    let total = rng.random_range(1..=6usize);
    let n_jobs = rng.random_range(1..=total.min(3));
    let mut sizes = vec![1usize; n_jobs];
    for _ in n_jobs..total {
        sizes[rng.random_range(0..n_jobs)] += 1;
    }
    let jobs = sizes
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let tasks = (0..n)
                .map(|i| {
                    let kind = kinds[rng.random_range(0..2)];
                    TaskSpec {
                        id: TaskId(i as u32),
                        exec: rng.random_range(1..=12),
                        cores: rng.random_range(1..=cap(kind)),
                        kind,
                        deps: (0..i).filter(|_| rng.random_bool(0.4)).map(|d| TaskId(d as u32)).collect(),
                    }
                })
                .collect();
            let d_initial = rng.random_range(1.0..2.5);
            let d_final = d_initial + rng.random_range(0.1..1.5);
            let interior = if rng.random_bool(0.5) { vec![((d_initial + d_final) / 2.0, rng.random())] } else { vec![] };
            let spec = JobSpec {
                id: JobId(j as u32 * 2 + 1),
                arrive: rng.random_range(0..6),
                vmax: rng.random_range(1.0..100.0),
                curve: ValueCurve::new(d_initial, d_final, interior).unwrap(),
                tasks,
            };
            Job::new(spec, ccr).unwrap()
        })
        .collect();
    (jobs, platform)
}

/// Runs `n` random instances under every policy through both simulators and
/// asserts identical traces; returns (placements, starvations) compared.
pub fn check_reference_auction(n: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut starved = 0;
    let mut placements = 0;
    for case in 0..n {
        let (jobs, platform) = instance(&mut rng);
        let seed = rng.random();
        for policy in Policy::ALL {
            let (want, status) = reference(&jobs, &platform, policy, seed);
            let got = run(&jobs, &platform, SimOptions::new(policy, seed)).unwrap();
            let got_trace: Vec<_> =
                got.placements.iter().map(|p| (p.job, p.task, p.cluster, p.start, p.finish, p.bid)).collect();
            assert_eq!(got_trace, want, "case {case} policy {policy}: {jobs:#?} {platform:?}");
            for (o, s) in got.outcomes.iter().zip(&status) {
                match s {
                    Status::Done(f) => assert_eq!((o.finish, o.starved), (Some(*f), false), "case {case} {policy}"),
                    Status::Starved => assert!(o.starved, "case {case} {policy}"),
                    other => panic!("reference left job in {other:?}"),
                }
            }
            starved += got.outcomes.iter().filter(|o| o.starved).count();
            placements += want.len();
        }
    }
    (placements, starved)
}
