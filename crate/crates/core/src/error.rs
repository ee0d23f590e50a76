use thiserror::Error;

use crate::solver::SimState;

/// Errors raised across the toolkit and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The conjugate maximizer stayed on the search radius after escalation.
    #[error("conjugate maximizer pinned at radius cap {radius:e}; M may not be superlinear")]
    CapExceeded { radius: f64 },

    #[error("step rejected at t = {t}: CFL number {cfl:.4} exceeds limit {limit}")]
    StepRejected { t: f64, cfl: f64, limit: f64 },

    #[error("mass matrix not positive definite at t = {t} ({which})")]
    NotPositiveDefinite { t: f64, which: &'static str },

    #[error("run aborted at t = {t}: {reason}")]
    AbortedRun {
        t: f64,
        reason: String,
        last_good: Box<SimState>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
