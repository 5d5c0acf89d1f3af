use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dark state: operation needs nonzero intensity")]
    DarkState,

    #[error("not informationally complete: design rank {rank}, need {required}")]
    NotInformationallyComplete { rank: usize, required: usize },

    #[error("not completely positive: min Choi eigenvalue {min_eigenvalue:.3e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("truncation insufficient: remainder element has min eigenvalue {min_eigenvalue:.3e}")]
    TruncationInsufficient { min_eigenvalue: f64 },

    #[error("lossy-network inconsistency: null element has min eigenvalue {min_eigenvalue:.3e}")]
    LossyNetwork { min_eigenvalue: f64 },

    #[error("super-unital instrument: max eigenvalue of summed response operator {max_eigenvalue:.6}")]
    SuperUnitalInstrument { max_eigenvalue: f64 },

    #[error("insufficient events for branch {branch}")]
    InsufficientEvents { branch: usize },

    #[error("empty event log")]
    EmptyLog,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Contract(_) => "contract_violation",
            Error::DarkState => "dark_state",
            Error::NotInformationallyComplete { .. } => "not_informationally_complete",
            Error::NotCompletelyPositive { .. } => "not_completely_positive",
            Error::TruncationInsufficient { .. } => "truncation_insufficient",
            Error::LossyNetwork { .. } => "lossy_network_inconsistency",
            Error::SuperUnitalInstrument { .. } => "super_unital_instrument",
            Error::InsufficientEvents { .. } => "insufficient_events",
            Error::EmptyLog => "empty_log",
            Error::Numerical(_) => "numerical_failure",
            Error::Parse(_) => "parse_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
