use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("negative density {value} at node {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("nonpositive density {value} at node {index}")]
    NonPositiveDensity { index: usize, value: f64 },
    #[error("vacuum under nonzero momentum at node {index} (rho = {rho})")]
    Vacuum { index: usize, rho: f64 },
    #[error("no admissible samples: {0}")]
    NoSamples(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
