//! Error type shared across the library.

use thiserror::Error;

use crate::circuit::StoppingLog;
use crate::real::Real;

#[derive(Debug, Error)]
pub enum CoreError<F: Real> {
    /// A domain type rejected its inputs at construction.
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two trajectories that must share one grid do not.
    #[error("grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },

    /// The weight function has zero L2 norm on the grid.
    #[error("degenerate psi: zero L2 norm on the grid")]
    DegeneratePsi,

    /// A restart construction ran out of grid before its schedule completed.
    /// Carries whatever stopping data was realized.
    #[error("grid horizon exhausted: realized {realized} of {needed} stopping times")]
    IncompleteConstruction {
        log: StoppingLog<F>,
        realized: usize,
        needed: usize,
    },

    /// Too few paths to evaluate a statistical check.
    #[error("underpowered ensemble: {n} paths, need at least {min}")]
    Underpowered { n: usize, min: usize },

    /// More per-path construction failures than the run tolerates.
    #[error("failed-path budget exceeded: {failed} of {total} paths failed")]
    FailedPathBudget { failed: usize, total: usize },
}

impl<F: Real> CoreError<F> {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        CoreError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
