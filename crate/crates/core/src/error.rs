use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("series too short: n = {n}, need at least {min}")]
    TooShort { n: usize, min: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("lag {lag} too large for series of length {n}")]
    LagTooLarge { lag: usize, n: usize },

    #[error("degenerate (near-zero) variance at prefix t = {0}")]
    DegenerateVariance(usize),

    #[error("LAD solver failed at prefix t = {0}")]
    SolverFailed(usize),

    #[error("need at least two valid prefix estimates")]
    TooFewPrefixes,

    #[error("block length {l} exceeds series length {n}")]
    BlockTooLong { l: usize, n: usize },

    #[error("{skipped} of {total} bootstrap resamples were degenerate")]
    TooManyDegenerateResamples { skipped: usize, total: usize },

    #[error("critical value simulation: {resampled} of {total} replications were singular")]
    TooManyResamples { resampled: usize, total: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error comes from input validation rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::TooShort { .. }
                | Error::LagTooLarge { .. }
                | Error::BlockTooLong { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
