use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {context} at epoch {epoch}")]
    NonFinite { context: &'static str, epoch: usize },

    #[error("assignment covers {actual} nodes, graph has {expected}")]
    Coverage { expected: usize, actual: usize },

    #[error("exact label matching limited to {limit} communities, got {actual}")]
    TooManyCommunities { limit: usize, actual: usize },

    #[error("invalid new node: {0}")]
    NewNode(String),

    #[error("missing centroids: assignment was not produced by clustering")]
    MissingCentroids,

    #[error("dataset has no ground-truth labels; {0} cannot be computed")]
    MissingLabels(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
