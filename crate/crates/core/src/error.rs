use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the mapping library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("Cholesky factor has a zero or non-finite diagonal entry")]
    SingularFactor,

    #[error("component subset is empty")]
    EmptySubset,

    #[error("component index {index} out of range for a model with {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("no mixture component has numerically nonzero density at the query point")]
    NoSupport,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({0}, {1}, {2}) lies outside the hash grid")]
    OutOfBounds(f64, f64, f64),

    #[error("bad magic bytes in model file")]
    BadMagic,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("model data truncated: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("model data has {0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("PLY: {0}")]
    Ply(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("config: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
