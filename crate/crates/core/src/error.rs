use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract arguments.
    #[error("invalid input: {0}")]
    Input(String),

    /// A scenario or model violates one of its named invariants.
    #[error("invariant `{name}` violated: {detail}")]
    Invariant { name: &'static str, detail: String },

    /// Search structures could not be built (e.g. no IK at an endpoint).
    #[error("construction failed: {0}")]
    Construction(String),

    /// Operation requires planner state that does not exist yet.
    #[error("invalid planner state: {0}")]
    State(String),

    /// Internal consistency check failed. Always a bug.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn invariant(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            name,
            detail: detail.into(),
        }
    }

    /// Short machine-readable tag, used in CLI error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Invariant { .. } => "invariant",
            Error::Construction(_) => "construction",
            Error::State(_) => "state",
            Error::Internal(_) => "internal",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
