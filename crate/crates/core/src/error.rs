use thiserror::Error;

/// Errors raised by the estimators, the experiment harness and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The input is well-formed but the operation is undefined on it
    /// (for example the mean of an empty dataset).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an analytic formula does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Malformed textual input.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A sweep cell failed; carries the cell description.
    #[error("sweep cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
