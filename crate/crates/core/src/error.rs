use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read or write `{}`", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("duplicate {kind} `{id}`")]
    Duplicate { kind: &'static str, id: String },

    #[error("article `{0}` has an empty step list")]
    EmptySteps(String),

    #[error("step `{0}` has empty text after normalization")]
    EmptyStepText(String),

    #[error("id `{0}` is used both as a goal_id and a step_id")]
    IdCollision(String),

    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },

    #[error("dimension mismatch for `{context}`: expected {expected}, found {found}")]
    DimMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value for `{0}`")]
    NonFinite(String),

    #[error("requested k={requested} candidates but only {available} goals are eligible")]
    NotEnoughCandidates { requested: usize, available: usize },

    #[error("no pair features for step `{step_id}` and goal `{goal_id}`")]
    MissingFeatures { step_id: String, goal_id: String },

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch} (learning rate too high?)")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn unknown(kind: &'static str, id: impl Into<String>) -> Self {
        Error::Unknown {
            kind,
            id: id.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input data rather than by a bug or
    /// misuse of the API.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_))
    }
}
