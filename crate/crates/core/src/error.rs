//! Error type shared by all analysis modules.

use thiserror::Error;

/// Failure classes surfaced by the library.
///
/// The variants mirror the process exit codes used by the command-line
/// frontend: validation and domain errors, insufficient data, out-of-regime
/// requests, and internal solver failures are kept distinct so callers can
/// react programmatically.
#[derive(Debug, Error)]
pub enum SteerError {
    /// An argument is outside its mathematical domain (e.g. a mixing
    /// parameter outside `[0, 1]`).
    #[error("domain error: {0}")]
    Domain(String),

    /// An input object violates a structural invariant (Hermiticity, unit
    /// trace, positivity, malformed file contents, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// An operation was called in a way that breaks its contract (e.g. a
    /// criterion evaluated on a non-canonical Bloch form).
    #[error("contract error: {0}")]
    Contract(String),

    /// Not enough data to produce an estimate (empty settings, zero
    /// singles, missing tomography pairs).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The request is outside the regime in which the method is derived;
    /// refusing is the honest answer.
    #[error("out of regime: {0}")]
    OutOfRegime(String),

    /// Numerical solver failure (LP did not converge, singular basis, ...).
    #[error("solver error: {0}")]
    Solver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SteerError>;

impl SteerError {
    /// Stable machine-readable class tag used in CLI error envelopes.
    pub fn class(&self) -> &'static str {
        match self {
            SteerError::Domain(_) => "domain",
            SteerError::Validation(_) => "validation",
            SteerError::Contract(_) => "contract",
            SteerError::InsufficientData(_) => "insufficient_data",
            SteerError::OutOfRegime(_) => "out_of_regime",
            SteerError::Solver(_) => "solver",
            SteerError::Io(_) => "io",
            SteerError::Json(_) => "json",
            SteerError::Csv(_) => "csv",
        }
    }
}
