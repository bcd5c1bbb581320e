//! Post-run aggregates over outcome records.

use serde::{Deserialize, Serialize};

use crate::engine::OutcomeRecord;

/// Achieved value over the maximum achievable. An empty run scores 1.
pub fn normalized_value(outcomes: &[OutcomeRecord]) -> f64 {
    let vmax: f64 = outcomes.iter().map(|o| o.vmax).sum();
    if vmax <= 0.0 {
        return 1.0;
    }
    outcomes.iter().map(|o| o.value).sum::<f64>() / vmax
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Starvation {
    pub jobs: usize,
    pub job_fraction: f64,
    /// tasks of starved jobs that never started
    pub tasks: usize,
    pub task_fraction: f64,
}

pub fn starvation(outcomes: &[OutcomeRecord]) -> Starvation {
    let starved: Vec<&OutcomeRecord> = outcomes.iter().filter(|o| o.starved).collect();
    let jobs = starved.len();
    let tasks: usize = starved.iter().map(|o| (o.tasks - o.tasks_started) as usize).sum();
    let total_tasks: usize = outcomes.iter().map(|o| o.tasks as usize).sum();
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Starvation {
        jobs,
        job_fraction: frac(jobs, outcomes.len()),
        tasks,
        task_fraction: frac(tasks, total_tasks),
    }
}

/// What orders jobs into deciles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecileKey {
    /// total core-ticks
    #[default]
    Work,
    CriticalPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileReport {
    /// Mean achieved SLR per decile, smallest jobs first; `None` when empty.
    pub mean_slr: [Option<f64>; 10],
    pub sizes: [usize; 10],
    /// starved jobs left out
    pub excluded: usize,
}

/// Mean SLR of completed jobs split into ten equal-count groups by size.
/// Leftover jobs go one each to the leading groups.
pub fn slr_by_decile(outcomes: &[OutcomeRecord], key: DecileKey) -> DecileReport {
    let mut done: Vec<&OutcomeRecord> = outcomes.iter().filter(|o| !o.starved).collect();
    let size_of = |o: &OutcomeRecord| match key {
        DecileKey::Work => o.work,
        DecileKey::CriticalPath => o.cp,
    };
    done.sort_by_key(|o| (size_of(o), o.job));
    let n = done.len();
    let mut mean_slr = [None; 10];
    let mut sizes = [0; 10];
    let mut at = 0;
    for d in 0..10 {
        let len = n / 10 + usize::from(d < n % 10);
        sizes[d] = len;
        if len > 0 {
            let sum: f64 = done[at..at + len].iter().map(|o| o.slr.expect("completed job has slr")).sum();
            mean_slr[d] = Some(sum / len as f64);
        }
        at += len;
    }
    DecileReport { mean_slr, sizes, excluded: outcomes.len() - n }
}
