//! Sweeps over (policy × load × seed) with on-disk, resumable results.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! summary.csv
//! runs/<policy>/load-<load>/seed-<seed>/{outcomes.csv,summary.json[,events.csv]}
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::audit;
use crate::auction::ClearingMode;
use crate::engine::{render_event_log, render_outcomes_csv, run, OutcomeRecord, RunResult, SimOptions};
use crate::error::{ConfigError, Error, Result};
use crate::io::write_atomic;
use crate::metrics::{normalized_value, slr_by_decile, starvation, DecileKey};
use crate::platform::PlatformSpec;
use crate::policy::{Policy, PolicyOptions};
use crate::workload::{GenConfig, Workload};

pub const DEFAULT_LOADS: [f64; 8] = [0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub policies: Vec<Policy>,
    pub loads: Vec<f64>,
    pub seeds: Vec<u64>,
    pub policy_opts: PolicyOptions,
    pub clearing: ClearingMode,
    pub decile_key: DecileKey,
    /// verify every run's invariants before accepting it
    pub audit: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            policies: Policy::ALL.to_vec(),
            loads: DEFAULT_LOADS.to_vec(),
            seeds: (0..10).collect(),
            policy_opts: PolicyOptions::default(),
            clearing: ClearingMode::default(),
            decile_key: DecileKey::default(),
            audit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub event_log: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GenConfig,
    pub platform: PlatformSpec,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Laptop-sized variant: four 100-core clusters, 500 jobs, 5 seeds.
    pub fn desk() -> Self {
        ExperimentConfig {
            generator: GenConfig { n_jobs: 500, cores: [1, 10], ..GenConfig::default() },
            platform: PlatformSpec::uniform(3, 1, 100, 0.2),
            sweep: SweepConfig {
                loads: vec![0.7, 0.9, 1.0, 1.1, 1.2, 1.4],
                seeds: (0..5).collect(),
                ..SweepConfig::default()
            },
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            ConfigError::new(json_field_hint(&e.to_string()), format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.generator.validate()?;
        self.platform.validate().map_err(|e| ConfigError::new("platform", e.to_string()))?;
        if self.sweep.loads.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(ConfigError::new("sweep.loads", "loads must be positive"));
        }
        if self.sweep.policies.is_empty() {
            return Err(ConfigError::new("sweep.policies", "no policies selected"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Best-effort field name out of a serde error message.
fn json_field_hint(msg: &str) -> String {
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    "config".to_string()
}

/// Load as written in paths and CSVs.
pub fn fmt_load(load: f64) -> String {
    format!("{load}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub policy: Policy,
    pub load: f64,
    pub seed: u64,
}

impl Cell {
    pub fn dir(&self, out: &Path) -> PathBuf {
        out.join("runs")
            .join(self.policy.name())
            .join(format!("load-{}", fmt_load(self.load)))
            .join(format!("seed-{}", self.seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: Policy,
    pub load: f64,
    pub seed: u64,
    pub normalized_value: f64,
    pub starved_count: usize,
    pub starved_fraction: f64,
    pub decile_slr: [Option<f64>; 10],
    pub starved_tasks: usize,
}

pub fn summary_header() -> String {
    let mut h = String::from("policy,load,seed,normalized_value,starved_count,starved_fraction");
    for d in 1..=10 {
        write!(h, ",decile_slr_{d}").unwrap();
    }
    h.push_str(",starved_tasks");
    h
}

impl SummaryRow {
    pub fn from_outcomes(cell: Cell, outcomes: &[OutcomeRecord], key: DecileKey) -> Self {
        let s = starvation(outcomes);
        SummaryRow {
            policy: cell.policy,
            load: cell.load,
            seed: cell.seed,
            normalized_value: normalized_value(outcomes),
            starved_count: s.jobs,
            starved_fraction: s.job_fraction,
            decile_slr: slr_by_decile(outcomes, key).mean_slr,
            starved_tasks: s.tasks,
        }
    }

    pub fn to_csv_line(&self) -> String {
        let mut s = format!(
            "{},{},{},{},{},{}",
            self.policy,
            fmt_load(self.load),
            self.seed,
            self.normalized_value,
            self.starved_count,
            self.starved_fraction
        );
        for d in &self.decile_slr {
            s.push(',');
            if let Some(v) = d {
                write!(s, "{v}").unwrap();
            }
        }
        write!(s, ",{}", self.starved_tasks).unwrap();
        s
    }
}

pub fn render_summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = summary_header();
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv_line());
        s.push('\n');
    }
    s
}

/// Simulates one cell of a sweep and checks it if asked.
pub fn run_cell(workload: &Workload, platform: &PlatformSpec, sweep: &SweepConfig, cell: Cell, event_log: bool) -> Result<RunResult> {
    let jobs = workload.jobs_for(cell.load, platform)?;
    let opts = SimOptions {
        policy: cell.policy,
        seed: cell.seed,
        policy_opts: sweep.policy_opts,
        clearing: sweep.clearing,
        event_log,
    };
    let result = run(&jobs, platform, opts)?;
    if sweep.audit {
        let problems = audit(&jobs, platform, cell.policy, &result);
        if !problems.is_empty() {
            return Err(Error::Format(format!("audit failed: {}", problems.join("; "))));
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub policy: Policy,
    pub load: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SummaryRow>,
    pub failures: Vec<Failure>,
    pub skipped: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    workloads: Vec<WorkloadEntry>,
    cells: usize,
    failures: &'a [Failure],
}

#[derive(Serialize)]
struct WorkloadEntry {
    seed: u64,
    sha256: String,
}

/// Options that do not change results.
#[derive(Debug, Clone, Default)]
pub struct SweepRunOptions {
    /// worker threads; 0 uses all cores
    pub jobs: usize,
    pub resume: bool,
}

/// Runs the full Cartesian sweep for the given workloads and writes every
/// artifact under `out`. Failed cells are reported, not fatal.
pub fn run_sweep(cfg: &ExperimentConfig, workloads: &[Workload], out: &Path, opts: &SweepRunOptions) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &policy in &cfg.sweep.policies {
        for &load in &cfg.sweep.loads {
            for w in workloads {
                cells.push((Cell { policy, load, seed: w.seed }, w));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<(SummaryRow, bool), Failure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(cell, workload)| {
                let dir = cell.dir(out);
                let row_path = dir.join("summary.json");
                if opts.resume {
                    if let Ok(text) = std::fs::read_to_string(&row_path) {
                        if let Ok(row) = serde_json::from_str::<SummaryRow>(&text) {
                            return Ok((row, true));
                        }
                    }
                }
                let fail = |e: Error| Failure { policy: cell.policy, load: cell.load, seed: cell.seed, error: e.to_string() };
                let result = run_cell(workload, &cfg.platform, &cfg.sweep, cell, cfg.output.event_log).map_err(fail)?;
                let row = SummaryRow::from_outcomes(cell, &result.outcomes, cfg.sweep.decile_key);
                write_atomic(&dir.join("outcomes.csv"), render_outcomes_csv(&result.outcomes).as_bytes()).map_err(fail)?;
                if cfg.output.event_log {
                    write_atomic(&dir.join("events.csv"), render_event_log(&result.log).as_bytes()).map_err(fail)?;
                }
                let json = serde_json::to_string(&row).expect("row serializes");
                write_atomic(&row_path, json.as_bytes()).map_err(fail)?;
                log::info!("{} load {} seed {}: value {:.4}", cell.policy, fmt_load(cell.load), cell.seed, row.normalized_value);
                Ok((row, false))
            })
            .collect()
    });

    let mut outcome = SweepOutcome::default();
    for r in results {
        match r {
            Ok((row, skipped)) => {
                outcome.skipped += usize::from(skipped);
                outcome.rows.push(row);
            }
            Err(f) => {
                log::error!("{} load {} seed {}: {}", f.policy, fmt_load(f.load), f.seed, f.error);
                outcome.failures.push(f);
            }
        }
    }
    write_atomic(&out.join("summary.csv"), render_summary_csv(&outcome.rows).as_bytes())?;

    let manifest = Manifest {
        tool: "bidsim",
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: cfg.hash(),
        config: cfg,
        workloads: workloads
            .iter()
            .map(|w| WorkloadEntry { seed: w.seed, sha256: hex::encode(Sha256::digest(w.to_json().as_bytes())) })
            .collect(),
        cells: cells.len(),
        failures: &outcome.failures,
    };
    let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    m.push('\n');
    write_atomic(&out.join("manifest.json"), m.as_bytes())?;
    Ok(outcome)
}

/// Generates one workload per configured seed.
pub fn generate_workloads(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<Workload>> {
    seeds.par_iter().map(|&s| Workload::generate(&cfg.generator, &cfg.platform, s)).collect()
}

pub fn workload_file_name(seed: u64) -> String {
    format!("workload-seed-{seed}.json")
}
