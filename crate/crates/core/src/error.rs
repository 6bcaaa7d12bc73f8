use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("training error: {0}")]
    Training(String),

    /// Bad input data, usually an out-of-vocabulary word or symbol.
    #[error("data error in utterance {utterance}: {reason}")]
    Data { utterance: String, reason: String },

    #[error("alignment error in utterance {utterance}: {reason}")]
    Alignment { utterance: String, reason: String },

    #[error("decode error in utterance {utterance}: {reason}")]
    Decode { utterance: String, reason: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("unknown utterance id {0}")]
    Lookup(String),

    /// A precondition of an operation was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal invariant failed; the name identifies which one.
    #[error("invariant violated: {name}: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn invariant(name: &'static str, detail: impl Into<String>) -> Self {
        Error::Invariant {
            name,
            detail: detail.into(),
        }
    }
}
