use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid channel: Choi operator has eigenvalue {min_eigenvalue:.3e}")]
    InvalidChannel { min_eigenvalue: f64 },

    #[error("empty candidate set: best completion has eigenvalue {best_eigenvalue:.3e}")]
    EmptyCandidateSet { best_eigenvalue: f64 },

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
