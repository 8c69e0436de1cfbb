use thiserror::Error;

use crate::descent::ConvergenceTrace;
use crate::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("outside the domain of {map}: {reason}")]
    Domain { map: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(&'static str),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("no bracket found after {doublings} doublings (arc length {reached} < target {target})")]
    NonConvergence {
        doublings: usize,
        reached: f64,
        target: f64,
    },

    #[error("unknown diffeomorphism `{0}`")]
    UnknownGeometry(String),

    #[error("missing parameter `{param}` for `{geometry}`")]
    MissingParameter {
        geometry: String,
        param: &'static str,
    },

    /// Backtracking exhausted without an acceptable trial point.
    #[error("line search stalled after {} iterations", .0.trace.len())]
    Stalled(Box<Stall>),
}

/// Best iterate and history at the moment a line search gave up.
#[derive(Debug, Clone)]
pub struct Stall {
    pub best: Point,
    pub trace: ConvergenceTrace,
}

impl Error {
    pub(crate) fn domain(map: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            map,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

pub(crate) fn check_finite(v: &nalgebra::DVector<f64>, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
