use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The layout of groups or contrasts cannot support the requested analysis.
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    /// The data carry no usable variation (zero variance, all ties, zero MAD, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    /// A numerical precondition failed (indefinite correlation, singular information, ...).
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    /// An argument is outside its admissible range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
