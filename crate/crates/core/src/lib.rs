//! Deterministic discrete-time simulation of market-based scheduling for
//! DAG-structured jobs on clusters of kinded cores.
//!
//! Jobs arrive over time, their ready tasks bid under one of ten policies, and
//! a central auctioneer clears the market at every scheduling instant: the best
//! bidder goes to the matching cluster with most free cores until the queue
//! empties or the best bidder does not fit. Each job earns value from a
//! piecewise-linear curve over its schedule length ratio and starves once its
//! final deadline passes.

pub mod auction;
pub mod audit;
pub mod curve;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod model;
pub mod platform;
pub mod policy;
pub mod report;
pub mod workload;

pub use auction::ClearingMode;
pub use curve::ValueCurve;
pub use engine::{run, OutcomeRecord, RunResult, SimOptions};
pub use error::{Error, Result};
pub use experiment::ExperimentConfig;
pub use model::{Job, JobId, JobSpec, Kind, Task, TaskId, TaskSpec, Tick};
pub use platform::PlatformSpec;
pub use policy::Policy;
pub use workload::{GenConfig, Workload};
