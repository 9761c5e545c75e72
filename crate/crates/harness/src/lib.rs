//! Experiment harness for the `dfrc-core` designers: configuration,
//! seeded Monte Carlo runs, aggregation and the CSV/JSON outputs consumed
//! by plotting scripts.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot write {}: {source}", path.display())]
    Unwritable { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Core(#[from] dfrc_core::Error),

    #[error("every trial was infeasible")]
    AllInfeasible,

    #[error("no trial produced a design ({0} solver failures)")]
    AllFailed(usize),
}

impl HarnessError {
    /// Process exit code: 2 for bad input, 3 when nothing was feasible, 4
    /// for solver failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Unwritable { .. } => 2,
            HarnessError::Core(dfrc_core::Error::Domain(_) | dfrc_core::Error::Contract(_)) => 2,
            HarnessError::AllInfeasible | HarnessError::Core(dfrc_core::Error::Infeasible { .. }) => 3,
            HarnessError::AllFailed(_) | HarnessError::Core(dfrc_core::Error::Solver(_)) => 4,
            HarnessError::Io(_) | HarnessError::Csv(_) | HarnessError::Json(_) => 1,
        }
    }
}
