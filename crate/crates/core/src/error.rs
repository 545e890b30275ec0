use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an equation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exponent exceeded the configured cap before evaluation.
    #[error("range error: exponent {exponent:.3} exceeds cap {cap}")]
    Range { exponent: f64, cap: f64 },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("grid alignment error: {0}")]
    Alignment(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    /// Keeps the underlying I/O error, so callers can still see its kind.
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(io) = e.into_kind() {
                return Error::Io(io);
            }
            unreachable!("is_io_error implies an Io kind");
        }
        Error::Io(std::io::Error::other(e))
    }
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), message: message.into() }
    }
}
