use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate cell {cell}: signed area {area:e}")]
    DegenerateCell { cell: usize, area: f64 },

    #[error("cell {cell} is not star-shaped with respect to its centroid")]
    NotStarShaped { cell: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("local solve failed: {0}")]
    LinearSolve(String),

    #[error("power iteration did not converge after {iterations} iterations (last estimate {lambda:e}, relative change {change:e})")]
    NoConvergence {
        iterations: usize,
        lambda: f64,
        change: f64,
        vector: Vec<f64>,
    },

    #[error("instability detected at step {step} (t = {t}): {reason}")]
    Unstable { step: usize, t: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves (instability, non-convergence),
    /// as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. } | Error::Unstable { .. } | Error::LinearSolve(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
