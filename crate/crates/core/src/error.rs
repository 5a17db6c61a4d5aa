use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A feedback-channel bitstring cannot be decoded.
    #[error("malformed request: {0}")]
    MalformedRequest(String),

    /// A request does not fit the wire format's fixed-width fields.
    #[error("encoding overflow: {0}")]
    EncodingOverflow(String),

    /// An interference variance became non-positive where it must not.
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    /// A throughput ratio was requested with a zero denominator.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
