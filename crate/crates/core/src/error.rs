use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value is outside the admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested computation is not defined for these inputs.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator produced a non-finite value.
    #[error("integration diverged at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    /// Malformed serialized input.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidParameter(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
