//! Post-run invariant checks. The audit re-derives every start constraint and
//! finish time from the placement records alone and compares them with what
//! the engine reported.

use std::collections::BTreeMap;

use crate::auction::starvation_tick;
use crate::engine::{Placement, RunResult};
use crate::metrics::normalized_value;
use crate::model::{Job, JobId, TaskId, Tick};
use crate::platform::{queue_ready_at, DepDone, Platform, PlatformSpec};
use crate::policy::{Bid, Policy, Sense};

/// Returns every violated invariant, or an empty list.
pub fn audit(jobs: &[Job], platform: &PlatformSpec, policy: Policy, result: &RunResult) -> Vec<String> {
    let mut bad = Vec::new();
    let plat = match Platform::new(platform) {
        Ok(p) => p,
        Err(e) => return vec![format!("platform: {e}")],
    };

    let mut placed: BTreeMap<(JobId, TaskId), &Placement> = BTreeMap::new();
    for p in &result.placements {
        if placed.insert((p.job, p.task), p).is_some() {
            bad.push(format!("task {}/{} placed more than once", p.job, p.task));
        }
    }

    let by_id: BTreeMap<JobId, &Job> = jobs.iter().map(|j| (j.id, j)).collect();
    for p in &result.placements {
        let Some(job) = by_id.get(&p.job) else {
            bad.push(format!("placement for unknown job {}", p.job));
            continue;
        };
        let Some(ti) = job.task_index(p.task) else {
            bad.push(format!("placement for unknown task {}/{}", p.job, p.task));
            continue;
        };
        let task = &job.tasks[ti];
        let cluster = plat.cluster(p.cluster);
        if cluster.kind != task.kind {
            bad.push(format!("task {}/{} of {} ran on {} cluster {}", p.job, p.task, task.kind, cluster.kind, p.cluster));
        }
        if p.finish != p.start + task.exec {
            bad.push(format!("task {}/{} ran {}..{} but exec is {}", p.job, p.task, p.start, p.finish, task.exec));
        }
        if p.start < job.arrive {
            bad.push(format!("task {}/{} started before its job arrived", p.job, p.task));
        }
        let mut deps = Vec::new();
        for &d in &task.deps {
            match placed.get(&(job.id, job.tasks[d].id)) {
                Some(dp) => deps.push(DepDone { finish: dp.finish, cluster: dp.cluster, exec: job.tasks[d].exec }),
                None => bad.push(format!("task {}/{} ran before dependency {}", p.job, p.task, job.tasks[d].id)),
            }
        }
        if deps.len() == task.deps.len() {
            let ready = queue_ready_at(&deps, task.kind, job.arrive, &plat);
            if ready != p.ready || p.start < ready {
                bad.push(format!(
                    "task {}/{} started {} with data ready at {} (engine said {})",
                    p.job, p.task, p.start, ready, p.ready
                ));
            }
        }
        if p.start >= starvation_tick(job) {
            bad.push(format!("task {}/{} started after its job starved", p.job, p.task));
        }
    }

    // core ledger per cluster; releases at a tick happen before acquisitions
    let mut ledger: Vec<Vec<(Tick, i64)>> = vec![Vec::new(); plat.clusters.len()];
    for p in &result.placements {
        if let Some(job) = by_id.get(&p.job) {
            if let Some(ti) = job.task_index(p.task) {
                let c = i64::from(job.tasks[ti].cores);
                ledger[p.cluster.0].push((p.start, c));
                ledger[p.cluster.0].push((p.finish, -c));
            }
        }
    }
    for (ci, mut deltas) in ledger.into_iter().enumerate() {
        deltas.sort();
        let cap = i64::from(plat.clusters[ci].total_cores);
        let mut used = 0i64;
        for (tick, d) in deltas {
            used += d;
            if used > cap {
                bad.push(format!("cluster {ci} oversubscribed at tick {tick}: {used} > {cap}"));
                break;
            }
        }
    }

    // same-tick starts must come out of the auction in priority order
    let sense = policy.sense();
    for w in result.placements.windows(2) {
        if w[0].start != w[1].start {
            continue;
        }
        let a = Bid { value: w[0].bid, sense, tiebreak: (0, w[0].job, w[0].task) };
        let b = Bid { value: w[1].bid, sense, tiebreak: (0, w[1].job, w[1].task) };
        let out_of_order = match sense {
            Sense::LowestWins => a.value > b.value,
            Sense::HighestWins => a.value < b.value,
        };
        if out_of_order {
            bad.push(format!("tick {}: bid {} placed before better bid {}", w[0].start, a.value, b.value));
        }
    }

    if result.outcomes.len() != jobs.len() {
        bad.push(format!("{} outcomes for {} jobs", result.outcomes.len(), jobs.len()));
    }
    for o in &result.outcomes {
        let Some(job) = by_id.get(&o.job) else {
            bad.push(format!("outcome for unknown job {}", o.job));
            continue;
        };
        let ran: Vec<&&Placement> = job.tasks.iter().filter_map(|t| placed.get(&(job.id, t.id))).collect();
        if o.starved {
            if o.value != 0.0 || o.finish.is_some() {
                bad.push(format!("starved job {} reports value or finish", o.job));
            }
            continue;
        }
        if ran.len() != job.tasks.len() {
            bad.push(format!("job {} completed with {} of {} tasks run", o.job, ran.len(), job.tasks.len()));
            continue;
        }
        let finish = ran.iter().map(|p| p.finish).max().unwrap_or(job.arrive);
        if o.finish != Some(finish) {
            bad.push(format!("job {} reported finish {:?}, replay gives {finish}", o.job, o.finish));
        }
        let slr = (finish - job.arrive) as f64 / job.cp as f64;
        if slr < 1.0 {
            bad.push(format!("job {} beat its critical path (slr {slr})", o.job));
            continue;
        }
        if o.slr != Some(slr) || o.value != job.curve.value(job.vmax, slr) {
            bad.push(format!("job {} slr/value disagree with replay", o.job));
        }
        if finish as f64 > job.deadline() + 1.0 {
            bad.push(format!("job {} completed after it should have starved", o.job));
        }
    }

    let nv = normalized_value(&result.outcomes);
    if !(0.0..=1.0).contains(&nv) {
        bad.push(format!("normalized value {nv} outside [0, 1]"));
    }
    bad
}
