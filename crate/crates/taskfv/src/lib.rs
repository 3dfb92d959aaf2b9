//! Command-line front end for the task-based finite-volume solver: single
//! runs plus the experiment harnesses (mesh convergence, strong scaling,
//! task-overhead microbenchmark, and the scheduler comparison on the spray
//! case). Experiments emit CSV with a header row; runs write state
//! snapshots.

pub mod config;
pub mod experiments;

pub use config::{parse_run_settings, RunArgs, RunSettings, SystemKind, UsageError};
