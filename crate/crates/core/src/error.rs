use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid qubit support: {0}")]
    InvalidSupport(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("protocol order violation: {0}")]
    ProtocolOrder(String),

    #[error("degenerate functional: Riesz matrix has zero Frobenius norm")]
    DegenerateFunctional,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
