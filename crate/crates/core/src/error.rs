use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad argument: dimension mismatch, out-of-range parameter, violated precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input outside the mathematical domain of the operation (e.g. indefinite matrix).
    #[error("domain error: {0}")]
    Domain(String),

    /// Ideal and nadir coincide in some objective; the instance has to be resampled.
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("generation failed: {0}")]
    Generation(String),

    /// A document could not be read back; `field` names the offending location.
    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("resource limit: {0}")]
    Resource(String),

    /// An internal invariant was broken. Indicates a bug, not bad input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.into(),
        }
    }
}
