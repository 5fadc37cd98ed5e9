use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value {0} cannot be quantized")]
    NonFinite(f64),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedding capacity exceeded: {0}")]
    Capacity(String),

    #[error("system too large: {n} spins exceeds the enumeration limit of {max}")]
    TooLarge { n: usize, max: usize },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error for key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("protocol error (code {code}): {msg}")]
    Protocol { code: u16, msg: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("sampler failed at epoch {epoch}: {source}")]
    Sampler {
        epoch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
