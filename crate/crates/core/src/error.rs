//! Error types shared across the scheme and game layers.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("length mismatch: expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("randomness error: {0}")]
    Randomness(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error("randomness stream exhausted: wanted {wanted} bytes, {remaining} left")]
    Exhausted { wanted: usize, remaining: usize },
}

impl From<StreamError> for Gf2Error {
    fn from(e: StreamError) -> Self {
        Gf2Error::Randomness(e.to_string())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Measure(#[from] clonelab_measure::MeasureError),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("wrong input length: expected {expected} bits, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("input is a punctured point")]
    PuncturedPoint,
    #[error("integrity check failed")]
    Integrity,
    #[error("decode error: {0}")]
    Decode(String),
    #[error("circuit encodes to {size} bytes, limit is {max}")]
    Oversize { size: usize, max: usize },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl Error {
    /// Whether the failure comes from a simulator or memory cap.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_) | Error::Measure(clonelab_measure::MeasureError::Resource(_)))
    }

    /// Whether the failure comes from invalid caller-supplied parameters.
    pub fn is_parameter(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Gf2(Gf2Error::Parameter(_))
                | Error::Gf2(Gf2Error::LengthMismatch { .. })
                | Error::InputLength { .. }
                | Error::Oversize { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
