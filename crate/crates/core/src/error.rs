use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no valid experts remain at step {step}")]
    NoValidExperts { step: usize },
    #[error("expert {expert} is not feasible on step {step} (row value {value})")]
    ExpertNotFeasible {
        expert: usize,
        step: usize,
        value: f64,
    },
    #[error("logarithm argument {value} is not positive for resource {resource}")]
    Domain { resource: usize, value: f64 },
    #[error("Frank-Wolfe stopped after {iterations} iterations with gap {gap:e} > {tol:e}")]
    GapNotReached {
        iterations: usize,
        gap: f64,
        tol: f64,
    },
    #[error("target {target} unreachable on step {step}")]
    Unreachable { step: usize, target: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
