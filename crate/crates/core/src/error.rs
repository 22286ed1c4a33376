//! Error type shared by all solver modules.

use thiserror::Error;

/// Errors reported by grid construction, state checks, integrators and the
/// Gibbs solvers.
#[derive(Debug, Error)]
pub enum HfbError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A state failed the positivity / symmetry checks of an admissible
    /// quasifree state. Carries the worst violation found.
    #[error("inadmissible state: {0} (max violation {1:.3e})")]
    Inadmissible(String, f64),

    /// NaN, overflow or a structural violation past the hard ceiling during
    /// time integration.
    #[error("numerical abort at t={t}: {reason}")]
    NumericalAbort { t: f64, reason: String },

    #[error("iteration did not converge: {0}")]
    NonConvergence(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}

pub type Result<T> = std::result::Result<T, HfbError>;
