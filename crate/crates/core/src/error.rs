use std::path::PathBuf;

use thiserror::Error;

use crate::model::{JobId, Kind, TaskId};

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("d_initial must be > 1 and finite, got {0}")]
    InitialDeadline(f64),
    #[error("d_final ({d_final}) must exceed d_initial ({d_initial})")]
    FinalDeadline { d_initial: f64, d_final: f64 },
    #[error("curve point {index} at slr {slr} lies outside ({d_initial}, {d_final})")]
    PointOutOfRange { index: usize, slr: f64, d_initial: f64, d_final: f64 },
    #[error("curve point {index} has slr {slr}, not strictly above the previous point")]
    NotIncreasing { index: usize, slr: f64 },
    #[error("curve point {index} has factor {factor} outside [0, 1]")]
    FactorRange { index: usize, factor: f64 },
    #[error("curve point {index} raises the factor to {factor}")]
    FactorIncreases { index: usize, factor: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("job {0} has no tasks")]
    EmptyJob(JobId),
    #[error("job {job}: vmax must be positive and finite, got {vmax}")]
    BadVmax { job: JobId, vmax: f64 },
    #[error("job {job}: task id {task} appears twice")]
    DuplicateTask { job: JobId, task: TaskId },
    #[error("job {job}: task {task} needs positive exec and cores")]
    ZeroSizedTask { job: JobId, task: TaskId },
    #[error("job {job}: task {task} depends on unknown task {dep}")]
    UnknownDependency { job: JobId, task: TaskId, dep: TaskId },
    #[error("job id {0} appears twice in the workload")]
    DuplicateJob(JobId),
    #[error("job {job}: dependency cycle through edge {from} -> {to}")]
    Cycle { job: JobId, from: TaskId, to: TaskId },
}

#[derive(Debug, Error, PartialEq)]
pub enum PlatformError {
    #[error("platform has no clusters")]
    Empty,
    #[error("cluster {0} has zero cores")]
    ZeroCores(usize),
    #[error("ccr must be finite and >= 0, got {0}")]
    Ccr(f64),
    #[error("job {job}: task {task} needs {kind} but no cluster of that kind exists")]
    MissingKind { job: JobId, task: TaskId, kind: Kind },
    #[error("job {job}: task {task} needs {cores} cores, largest {kind} cluster has {largest}")]
    TaskTooWide { job: JobId, task: TaskId, kind: Kind, cores: u32, largest: u32 },
}

/// Configuration problems, each naming the offending field.
#[derive(Debug, Error, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
