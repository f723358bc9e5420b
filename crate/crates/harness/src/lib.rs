//! Reproducible experiment harness for the medoid-SGD toolkit:
//! configuration parsing, paired Monte Carlo execution with CSV/JSON
//! persistence, aggregation micro-benchmarks, and the theory-verification
//! driver behind the `rsgd` command line.

use thiserror::Error;

pub mod bench;
pub mod config;
pub mod runner;
pub mod verify;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Usage or configuration problems; the CLI maps these to exit code 2.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}
