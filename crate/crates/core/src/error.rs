use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the region where the operation is defined,
    /// e.g. `|u|` beyond a model's validity radius.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure did not reach its target accuracy.
    #[error("numerical error: {what} (achieved {achieved:e})")]
    Numerical { what: String, achieved: f64 },

    /// The requested size or model is beyond what the backend supports.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A normalizing quantity vanished (e.g. a partition-function denominator).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Every offending configuration key, in file order.
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(what: impl Into<String>, achieved: f64) -> Self {
        Error::Numerical {
            what: what.into(),
            achieved,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
