use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bidsim::experiment::{
    generate_workloads, run_sweep, workload_file_name, ExperimentConfig, SweepRunOptions,
};
use bidsim::report::{build_tables, parse_summary};
use bidsim::{Error, Policy, Workload};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "bidsim", version, about = "Market-based DAG workflow scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one workload file per seed.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for the workload files.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated seeds (default: the config's sweep seeds).
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run a policy × load × seed sweep.
    Run(RunArgs),
    /// Turn a summary CSV into plot-ready tables.
    Report {
        /// summary.csv written by `run`.
        summary: PathBuf,
        /// Directory for the tables (default: next to the summary).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Load whose runs feed the per-decile slowdown table.
        #[arg(long, default_value_t = 1.2)]
        decile_load: f64,
    },
    /// Print a complete configuration with every default filled in.
    Config {
        #[arg(long, value_enum, default_value_t = Preset::Full)]
        preset: Preset,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 4 × 1000 cores, 10,000 jobs, 10 seeds
    Full,
    /// 4 × 100 cores, 500 jobs, 5 seeds
    Desk,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory of generated workloads; generated in memory when absent.
    #[arg(long)]
    workloads: Option<PathBuf>,
    /// Directory for per-run results, summary.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated policy names (default: the config's sweep policies).
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Comma-separated loads (default: the config's sweep loads).
    #[arg(long, value_delimiter = ',')]
    loads: Option<Vec<f64>>,
    /// Comma-separated seeds (default: the config's sweep seeds).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Skip cells that already have results.
    #[arg(long)]
    resume: bool,
    /// Write per-run event logs.
    #[arg(long)]
    event_log: bool,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Other(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json { .. } | Error::Curve(_) | Error::Model(_) | Error::Platform(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => CliError::Config(e.to_string()),
            other => CliError::from(other),
        }),
        None => Ok(preset(args.preset)),
    }
}

fn preset(p: Preset) -> ExperimentConfig {
    match p {
        Preset::Full => ExperimentConfig::default(),
        Preset::Desk => ExperimentConfig::desk(),
    }
}

fn cmd_generate(config: &ConfigArgs, out: &Path, seeds: Option<Vec<u64>>) -> Result<u8, CliError> {
    let cfg = load_config(config)?;
    let seeds = seeds.unwrap_or_else(|| cfg.sweep.seeds.clone());
    for w in generate_workloads(&cfg, &seeds)? {
        let path = out.join(workload_file_name(w.seed));
        w.save(&path)?;
        log::info!("wrote {}", path.display());
    }
    Ok(0)
}

fn read_workloads(dir: &Path, seeds: &[u64]) -> Result<Vec<Workload>, CliError> {
    seeds
        .iter()
        .map(|&s| {
            let path = dir.join(workload_file_name(s));
            Workload::load(&path).map_err(|e| CliError::Config(e.to_string()))
        })
        .collect()
}

fn seeds_in(dir: &Path) -> Result<Vec<u64>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut seeds: Vec<u64> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("workload-seed-")?.strip_suffix(".json")?.parse().ok()
        })
        .collect();
    seeds.sort_unstable();
    Ok(seeds)
}

fn cmd_run(args: RunArgs) -> Result<u8, CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(names) = &args.policies {
        cfg.sweep.policies = names
            .iter()
            .map(|n| n.parse::<Policy>().map_err(|e| CliError::Config(format!("--policies: {e}"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(loads) = &args.loads {
        cfg.sweep.loads = loads.clone();
    }
    if let Some(seeds) = &args.seeds {
        cfg.sweep.seeds = seeds.clone();
    }
    cfg.output.event_log |= args.event_log;
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let workloads = match &args.workloads {
        Some(dir) => {
            let seeds = if args.seeds.is_some() { cfg.sweep.seeds.clone() } else { seeds_in(dir)? };
            if seeds.is_empty() {
                return Err(CliError::Config(format!("{}: no workload files", dir.display())));
            }
            cfg.sweep.seeds = seeds.clone();
            read_workloads(dir, &seeds)?
        }
        None => generate_workloads(&cfg, &cfg.sweep.seeds)?,
    };

    let outcome = run_sweep(&cfg, &workloads, &args.out, &SweepRunOptions { jobs: args.jobs, resume: args.resume })?;
    eprintln!(
        "{} cells ({} resumed), {} failed; summary at {}",
        outcome.rows.len() + outcome.failures.len(),
        outcome.skipped,
        outcome.failures.len(),
        args.out.join("summary.csv").display()
    );
    Ok(if outcome.failures.is_empty() { 0 } else { EXIT_PARTIAL })
}

fn cmd_report(summary: &Path, out: Option<PathBuf>, decile_load: f64) -> Result<u8, CliError> {
    let text = std::fs::read_to_string(summary).map_err(|e| CliError::Config(format!("{}: {e}", summary.display())))?;
    let rows = parse_summary(&text).map_err(|e| CliError::Config(e.to_string()))?;
    let tables = build_tables(&rows, decile_load);
    for m in &tables.missing {
        eprintln!("warning: no data for {m}");
    }
    let out = out.unwrap_or_else(|| summary.parent().map(Path::to_path_buf).unwrap_or_default());
    for (name, body) in [
        ("value_vs_load.csv", &tables.value_vs_load),
        ("starvation_vs_load.csv", &tables.starvation_vs_load),
        ("decile_slr.csv", &tables.decile_slr),
    ] {
        bidsim::io::write_atomic(&out.join(name), body.as_bytes())?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out, seeds } => cmd_generate(&config, &out, seeds),
        Command::Run(args) => cmd_run(args),
        Command::Report { summary, out, decile_load } => cmd_report(&summary, out, decile_load),
        Command::Config { preset: p } => {
            println!("{}", preset(p).to_json());
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
