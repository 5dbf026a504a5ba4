//! Pipeline driver for the `linbayes` library: configuration, synthetic
//! truth and data, MAP estimation, low-rank posterior, and checksummed
//! artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod problem;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{load_config, run_pipeline, Overrides, Pipeline, Stage};
pub use problem::{AnyModel, Problem};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "LINBAYES_THREADS";

/// Sizes the global thread pool from `LINBAYES_THREADS` when it is set.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config(THREADS_ENV, e.to_string()))
}
