use thiserror::Error;

pub type Result<T> = std::result::Result<T, QdepError>;

#[derive(Debug, Error)]
pub enum QdepError {
    /// Sample shape problems: too few observations, ragged columns, too few columns.
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// Non-finite or otherwise unusable values.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Argument outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or unsupported settings (grid depth, run counts, levels).
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    /// Malformed input files.
    #[error("input error: {0}")]
    Input(String),

    /// Calibration cache could not be read or written.
    #[error("cache error: {0}")]
    Cache(String),
}

impl QdepError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        QdepError::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        QdepError::Configuration(msg.into())
    }
}
