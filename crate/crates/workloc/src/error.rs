//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("individual {person_id} references zone {zone_id}, but only {zone_count} zones exist")]
    DanglingZone {
        person_id: u64,
        zone_id: usize,
        zone_count: usize,
    },

    #[error("individual {person_id} has non-positive weight {weight}")]
    NonPositiveWeight { person_id: u64, weight: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("individual {person_id} has no observed work zone")]
    MissingWorkZone { person_id: u64 },

    #[error("observed choice of individual {person_id} (zone {zone_id}) has probability zero")]
    ZeroProbabilityChoice { person_id: u64, zone_id: usize },

    #[error("no zone offers any jobs; the choice set is empty")]
    EmptyChoiceSet,

    #[error("all utilities are -inf; probabilities are undefined")]
    DegenerateUtilities,

    #[error("line search failed: step size underflowed at iteration {iteration}")]
    LineSearchFailure { iteration: usize },

    #[error("objective returned a non-finite value")]
    NonFiniteObjective,

    #[error("Hessian is not negative definite; standard errors unavailable")]
    HessianNotNegativeDefinite,

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch} ({diagnostics})")]
    NanLoss {
        epoch: usize,
        batch: usize,
        diagnostics: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("dataset fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for input/validation problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LineSearchFailure { .. }
            | Error::NonFiniteObjective
            | Error::HessianNotNegativeDefinite
            | Error::NanLoss { .. }
            | Error::DegenerateUtilities
            | Error::ZeroProbabilityChoice { .. } => 3,
            _ => 2,
        }
    }

    pub(crate) fn dim(what: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            got,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
