//! Experiment runner for the `trapwalk` library: TOML configs in, CSV and
//! JSON results out, one summary line per check.

pub mod config;
pub mod report;
pub mod suites;

use thiserror::Error;

pub use config::{ExperimentConfig, LawSpec, Suite, Threads};
pub use report::{Check, SuiteReport, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(#[from] trapwalk::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(trapwalk::Error::Config(_)) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
        }
    }
}

/// Runs the suite on a pool of the configured size.
pub fn execute(cfg: &ExperimentConfig) -> Result<SuiteReport, CliError> {
    cfg.validate()?;
    let threads = match cfg.threads {
        Threads::Auto => 0,
        Threads::Count(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| suites::run_suite(cfg))
}
