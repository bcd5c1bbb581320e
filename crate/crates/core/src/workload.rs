//! Synthetic workloads: DAG shape, task sizes and kinds, value curves, job
//! values and load-scaled arrival times following a weekly intensity profile.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::curve::ValueCurve;
use crate::error::{ConfigError, Error, Result};
use crate::model::{Job, JobId, JobSpec, Kind, TaskId, TaskSpec, Tick};
use crate::platform::PlatformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindShare {
    pub kind: Kind,
    pub share: f64,
}

/// Relative arrival intensity over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArrivalProfile {
    Flat,
    /// Working hours on weekdays are busiest, nights quieter, weekends quietest.
    /// Weeks start on a weekday at midnight.
    Weekly {
        day_ticks: u64,
        work_start: u64,
        work_end: u64,
        weekdays: u64,
        work_weight: f64,
        night_weight: f64,
        weekend_weight: f64,
    },
}

impl Default for ArrivalProfile {
    fn default() -> Self {
        ArrivalProfile::Weekly {
            day_ticks: 1440,
            work_start: 540,
            work_end: 1020,
            weekdays: 5,
            work_weight: 2.0,
            night_weight: 0.5,
            weekend_weight: 0.25,
        }
    }
}

impl ArrivalProfile {
    fn week(&self) -> u64 {
        match *self {
            ArrivalProfile::Flat => 1,
            ArrivalProfile::Weekly { day_ticks, .. } => 7 * day_ticks,
        }
    }

    fn raw_mean(&self) -> f64 {
        match *self {
            ArrivalProfile::Flat => 1.0,
            ArrivalProfile::Weekly {
                day_ticks,
                work_start,
                work_end,
                weekdays,
                work_weight,
                night_weight,
                weekend_weight,
            } => {
                let work = (work_end - work_start) as f64;
                let night = day_ticks as f64 - work;
                let weekday = work * work_weight + night * night_weight;
                let weekend = day_ticks as f64 * weekend_weight;
                (weekdays as f64 * weekday + (7 - weekdays) as f64 * weekend) / self.week() as f64
            }
        }
    }

    /// Constant-intensity piece containing `t`: `(end, raw weight)`.
    fn piece(&self, t: u64) -> (u64, f64) {
        match *self {
            ArrivalProfile::Flat => (u64::MAX, 1.0),
            ArrivalProfile::Weekly {
                day_ticks,
                work_start,
                work_end,
                weekdays,
                work_weight,
                night_weight,
                weekend_weight,
            } => {
                let day = t / day_ticks;
                let day_start = day * day_ticks;
                let tod = t - day_start;
                if day % 7 >= weekdays {
                    (day_start + day_ticks, weekend_weight)
                } else if tod < work_start {
                    (day_start + work_start, night_weight)
                } else if tod < work_end {
                    (day_start + work_end, work_weight)
                } else {
                    (day_start + day_ticks, night_weight)
                }
            }
        }
    }

    /// Intensity at tick `t`, normalized to a weekly mean of 1.
    pub fn weight(&self, t: u64) -> f64 {
        self.piece(t).1 / self.raw_mean()
    }

    /// Integral of [`Self::weight`] over `[0, t)`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let norm = self.raw_mean();
        let mut acc = 0.0;
        let mut pos = 0u64;
        while (pos as f64) < t {
            let (end, w) = self.piece(pos);
            let stop = (end as f64).min(t);
            acc += (stop - pos as f64) * w;
            pos = end;
        }
        acc / norm
    }

    /// Maps sorted quantiles in [0, 1) to times in [0, span) whose density
    /// follows the profile.
    fn invert(&self, sorted_quantiles: &[f64], span: f64) -> Vec<f64> {
        let total = self.cumulative(span);
        let mut out = Vec::with_capacity(sorted_quantiles.len());
        let mut pos = 0u64;
        let mut acc = 0.0;
        let norm = self.raw_mean();
        let mut qs = sorted_quantiles.iter().peekable();
        while let Some(&&q) = qs.peek() {
            let target = q * total;
            let (end, w) = self.piece(pos);
            let stop = (end as f64).min(span);
            let mass = (stop - pos as f64) * w / norm;
            if acc + mass > target || stop >= span {
                let x = if mass > 0.0 {
                    pos as f64 + (target - acc) / (w / norm)
                } else {
                    pos as f64
                };
                out.push(x.clamp(0.0, span.max(0.0)));
                qs.next();
                continue;
            }
            acc += mass;
            pos = end;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_jobs: usize,
    pub tasks_per_job: [u32; 2],
    /// log-uniform bounds in ticks
    pub exec: [u64; 2],
    /// log-uniform bounds, further capped by the smallest matching cluster
    pub cores: [u32; 2],
    pub kinds: Vec<KindShare>,
    /// rate of the exponential extra in-degree
    pub degree_lambda: f64,
    pub d_initial: [f64; 2],
    pub d_final: [f64; 2],
    pub curve_points: [u32; 2],
    /// offered load as a fraction of platform capacity
    pub load: f64,
    pub profile: ArrivalProfile,
    /// value per core-tick at full value
    pub unit_price: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_jobs: 10_000,
            tasks_per_job: [5, 20],
            exec: [10, 10_000],
            cores: [1, 100],
            kinds: vec![KindShare { kind: Kind(1), share: 0.8 }, KindShare { kind: Kind(2), share: 0.2 }],
            degree_lambda: 1.0,
            d_initial: [2.0, 4.0],
            d_final: [6.0, 10.0],
            curve_points: [5, 10],
            load: 1.0,
            profile: ArrivalProfile::default(),
            unit_price: 1.0,
        }
    }
}

fn range_err(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::new(format!("generator.{field}"), msg)
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn ordered<T: PartialOrd + std::fmt::Debug>(field: &str, r: &[T; 2]) -> Result<(), ConfigError> {
            if r[0] > r[1] {
                return Err(range_err(field, format!("lower bound {:?} exceeds upper bound {:?}", r[0], r[1])));
            }
            Ok(())
        }
        ordered("tasks_per_job", &self.tasks_per_job)?;
        ordered("exec", &self.exec)?;
        ordered("cores", &self.cores)?;
        ordered("d_initial", &self.d_initial)?;
        ordered("d_final", &self.d_final)?;
        ordered("curve_points", &self.curve_points)?;
        if self.tasks_per_job[0] == 0 {
            return Err(range_err("tasks_per_job", "jobs need at least one task"));
        }
        if self.exec[0] == 0 {
            return Err(range_err("exec", "execution times must be at least 1 tick"));
        }
        if self.cores[0] == 0 {
            return Err(range_err("cores", "tasks need at least one core"));
        }
        if !(self.d_initial[0] > 1.0) {
            return Err(range_err("d_initial", "initial deadlines must exceed 1"));
        }
        if !(self.d_final[0] > self.d_initial[1]) {
            return Err(range_err("d_final", "final deadlines must exceed every initial deadline"));
        }
        if !(self.degree_lambda > 0.0 && self.degree_lambda.is_finite()) {
            return Err(range_err("degree_lambda", "must be positive"));
        }
        if !(self.load > 0.0 && self.load.is_finite()) {
            return Err(range_err("load", "must be positive"));
        }
        if !(self.unit_price > 0.0 && self.unit_price.is_finite()) {
            return Err(range_err("unit_price", "must be positive"));
        }
        if self.kinds.is_empty() || self.kinds.iter().any(|k| !(k.share >= 0.0)) {
            return Err(range_err("kinds", "need at least one kind with non-negative shares"));
        }
        let total: f64 = self.kinds.iter().map(|k| k.share).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(range_err("kinds", format!("shares sum to {total}, expected 1")));
        }
        if let ArrivalProfile::Weekly { day_ticks, work_start, work_end, weekdays, work_weight, night_weight, weekend_weight } =
            self.profile
        {
            if day_ticks == 0 || work_start > work_end || work_end > day_ticks || weekdays > 7 {
                return Err(range_err("profile", "working hours must lie within a non-empty day"));
            }
            if [work_weight, night_weight, weekend_weight].iter().any(|w| !(*w >= 0.0))
                || self.profile.raw_mean() <= 0.0
            {
                return Err(range_err("profile", "weights must be non-negative and not all zero"));
            }
        }
        Ok(())
    }
}

/// Independent generator streams derived from one workload seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Structure = 0,
    Arrivals = 1,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn log_uniform<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    if lo == hi {
        return lo;
    }
    let x = rng.random_range((lo as f64).ln()..(hi as f64).ln()).exp().round() as u64;
    x.clamp(lo, hi)
}

fn pick_kind<R: Rng>(rng: &mut R, kinds: &[KindShare]) -> Kind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for k in kinds {
        acc += k.share;
        if u < acc {
            return k.kind;
        }
    }
    kinds.iter().rev().find(|k| k.share > 0.0).unwrap_or(&kinds[0]).kind
}

/// One job's tasks and dependencies, with arrival 0 and a placeholder value.
///
/// Tasks are ranked by id; every non-root task draws
/// `min(1 + round(Exp(λ)), rank)` distinct predecessors among lower ids, so the
/// graph is acyclic and weakly connected.
pub fn gen_job<R: Rng>(cfg: &GenConfig, rng: &mut R, id: JobId, cores_cap: impl Fn(Kind) -> Option<u32>) -> JobSpec {
    let n = rng.random_range(cfg.tasks_per_job[0]..=cfg.tasks_per_job[1]) as usize;
    let degree = Exp::new(cfg.degree_lambda).expect("validated lambda");
    let mut tasks = Vec::with_capacity(n);
    for i in 0..n {
        let exec = log_uniform(rng, cfg.exec[0], cfg.exec[1]);
        let kind = pick_kind(rng, &cfg.kinds);
        let cores = log_uniform(rng, u64::from(cfg.cores[0]), u64::from(cfg.cores[1])) as u32;
        let cores = cores_cap(kind).map_or(cores, |cap| cores.min(cap)).max(1);
        let deps = if i == 0 {
            Vec::new()
        } else {
            let extra = degree.sample(rng).round() as usize;
            let d = (1 + extra).min(i);
            let mut picked: Vec<u32> = sample(rng, i, d).into_iter().map(|p| p as u32).collect();
            picked.sort_unstable();
            picked.into_iter().map(TaskId).collect()
        };
        tasks.push(TaskSpec { id: TaskId(i as u32), exec, cores, kind, deps });
    }
    let curve = gen_curve(cfg, rng);
    let mut job = JobSpec { id, arrive: 0, vmax: 1.0, curve, tasks };
    job.vmax = assign_vmax(&job, cfg.unit_price);
    job
}

pub fn gen_curve<R: Rng>(cfg: &GenConfig, rng: &mut R) -> ValueCurve {
    let uniform = |rng: &mut R, r: [f64; 2]| if r[0] < r[1] { rng.random_range(r[0]..r[1]) } else { r[0] };
    let d_initial = uniform(rng, cfg.d_initial);
    let d_final = uniform(rng, cfg.d_final);
    let k = rng.random_range(cfg.curve_points[0]..=cfg.curve_points[1]) as usize;
    let mut slrs: Vec<f64> = (0..k)
        .map(|_| rng.random_range(d_initial..d_final))
        .filter(|&s| s > d_initial)
        .collect();
    slrs.sort_by(f64::total_cmp);
    slrs.dedup();
    let mut factors: Vec<f64> = (0..slrs.len()).map(|_| rng.random::<f64>()).collect();
    factors.sort_by(|a, b| b.total_cmp(a));
    ValueCurve::new(d_initial, d_final, slrs.into_iter().zip(factors).collect())
        .expect("generated curve satisfies construction rules")
}

/// Full value is proportional to the core-ticks the job consumes.
pub fn assign_vmax(job: &JobSpec, unit_price: f64) -> f64 {
    let work: u64 = job.tasks.iter().map(|t| t.exec * u64::from(t.cores)).sum();
    work as f64 * unit_price
}

/// Arrival ticks, ascending, for jobs carrying `total_work` core-ticks offered
/// at `load` times the capacity of `total_cores`.
pub fn gen_arrivals<R: Rng>(
    n_jobs: usize,
    total_work: u64,
    total_cores: u64,
    load: f64,
    profile: &ArrivalProfile,
    rng: &mut R,
) -> Vec<Tick> {
    let span = total_work as f64 / (total_cores as f64 * load);
    let mut quantiles: Vec<f64> = (0..n_jobs).map(|_| rng.random::<f64>()).collect();
    quantiles.sort_by(f64::total_cmp);
    profile.invert(&quantiles, span).into_iter().map(|t| t.floor() as Tick).collect()
}

/// A generated workload, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub seed: u64,
    pub config: GenConfig,
    /// platform the arrivals were scaled against
    pub platform: PlatformSpec,
    pub jobs: Vec<JobSpec>,
}

impl Workload {
    pub fn generate(cfg: &GenConfig, platform: &PlatformSpec, seed: u64) -> Result<Self> {
        cfg.validate()?;
        platform.validate()?;
        for k in &cfg.kinds {
            if k.share > 0.0 && platform.smallest(k.kind).is_none() {
                return Err(ConfigError::new("generator.kinds", format!("{} has no cluster on the platform", k.kind)).into());
            }
        }
        let mut rng = stream_rng(seed, Stream::Structure);
        let jobs: Vec<JobSpec> =
            (0..cfg.n_jobs).map(|i| gen_job(cfg, &mut rng, JobId(i as u32), |k| platform.smallest(k))).collect();
        let mut w = Workload { seed, config: cfg.clone(), platform: platform.clone(), jobs };
        w.jobs = w.retimed(cfg.load, platform);
        Ok(w)
    }

    pub fn total_work(&self) -> u64 {
        self.jobs.iter().map(|j| j.tasks.iter().map(|t| t.exec * u64::from(t.cores)).sum::<u64>()).sum()
    }

    /// The same jobs with arrivals drawn for `load` on `platform`. The quantile
    /// draws depend only on the seed, so loads differ only in time scale.
    pub fn retimed(&self, load: f64, platform: &PlatformSpec) -> Vec<JobSpec> {
        let mut rng = stream_rng(self.seed, Stream::Arrivals);
        let arrivals = gen_arrivals(
            self.jobs.len(),
            self.total_work(),
            platform.total_cores(),
            load,
            &self.config.profile,
            &mut rng,
        );
        self.jobs
            .iter()
            .zip(arrivals)
            .map(|(j, a)| JobSpec { arrive: a, ..j.clone() })
            .collect()
    }

    /// Validated jobs for a run at `load` on `platform`.
    pub fn jobs_for(&self, load: f64, platform: &PlatformSpec) -> Result<Vec<Job>> {
        self.retimed(load, platform)
            .into_iter()
            .map(|s| Job::new(s, platform.ccr).map_err(Error::from))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("workload serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}
