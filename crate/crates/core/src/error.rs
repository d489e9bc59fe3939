//! Error type shared by all simulator modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates an invariant; the message names the field.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A caller broke an operation precondition (bad basis, missing pilot, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Latin-square family construction requires a prime order.
    #[error("unsupported latin-square order {0}: prime order required")]
    UnsupportedOrder(usize),

    /// Statistics over an empty sample set are undefined.
    #[error("empty sample set")]
    EmptySamples,

    /// Rank selection on an all-zero singular spectrum.
    #[error("all-zero singular spectrum: no subspace to select")]
    NoSubspace,

    /// A numeric input or intermediate became NaN/inf.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),

    /// A module error tagged with where in the pipeline it happened
    /// (layout index, user id, ...).
    #[error("{context}: {source}")]
    Context {
        context: String,
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wrap with pipeline-position context.
    pub fn in_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
