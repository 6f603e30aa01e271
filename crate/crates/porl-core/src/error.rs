//! Crate-wide error type and process exit-code mapping.

use thiserror::Error;

/// Errors surfaced by model construction, filtering, planning, and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model data: a kernel row that is not a distribution, a
    /// dimension mismatch, a reward outside `[0, 1]`, and the like.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Configuration or CLI usage error (also covers file parse failures).
    #[error("config error: {0}")]
    Config(String),

    /// An enumeration or search exceeded its configured cap.
    #[error("cap exceeded for {what}: needed {needed}, cap {cap}")]
    CapExceeded {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    /// A belief update met an observation with zero predicted probability.
    /// Under a correct model this marks an inconsistent history.
    #[error("inconsistent history: zero posterior normalizer at step {step} (observation {observation})")]
    InconsistentHistory { step: usize, observation: usize },

    /// Numerical failure: non-finite input, exhausted iteration budget in the
    /// design solver, a clamp beyond tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract: 0 success, 2 config error, 3 cap
    /// exceeded, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::InvalidModel(_) => 2,
            Error::CapExceeded { .. } => 3,
            Error::InconsistentHistory { .. } | Error::Numerical(_) => 4,
        }
    }
}
