use thiserror::Error;

/// Errors produced while building, evaluating or persisting a packing problem.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("route {route} references missing port {port} on body {body}")]
    DanglingPort { route: usize, body: usize, port: usize },

    #[error("total mass must be positive")]
    ZeroMass,

    #[error("operator needs at least one value")]
    Empty,

    #[error("needs at least two objects, got {0}")]
    TooFewObjects(usize),

    #[error("enumeration budget of {0} search nodes exceeded")]
    BudgetExceeded(u64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in `{field}` at line {line}, column {column}: {message}")]
    Parse {
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
