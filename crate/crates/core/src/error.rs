use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Tensor dimensions disagree with what an operation requires.
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An invalid configuration value.
    #[error("invalid config `{key}`: {detail}")]
    Config { key: String, detail: String },

    /// The replay memory holds no valid trajectory start yet.
    #[error("replay memory not ready: no valid trajectory start")]
    NotReady,

    /// A byte payload could not be decoded.
    #[error("decode error: {0}")]
    Decode(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(detail: impl Into<String>) -> Self {
        Error::Contract(detail.into())
    }

    pub(crate) fn config(key: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            detail: detail.into(),
        }
    }
}
