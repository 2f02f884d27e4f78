//! Experiment runner for the `tracekit` library: configuration, task
//! dispatch, sweeps and CSV output.

pub mod config;
pub mod error;
pub mod runner;
pub mod sweep;

pub use config::{ExperimentConfig, ReconstructMode, SweepMetric, Task};
pub use error::{HarnessError, Result};
pub use runner::{run_task, RunRecord};

/// Environment variable setting the worker thread count.
pub const WORKERS_ENV: &str = "TRACEKIT_WORKERS";

/// Sizes the global thread pool from [`WORKERS_ENV`] if set. Results do not
/// depend on the worker count.
pub fn init_workers() -> Result<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| HarnessError::usage(WORKERS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    // A pool that already exists keeps its size; that only affects speed.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
