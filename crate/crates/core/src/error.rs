use std::path::PathBuf;

use crate::graph::VertexInstance;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("duplicate vertex instance (entity {}, t {})", .0.entity, .0.t)]
    DuplicateVertex(VertexInstance),

    #[error("unknown vertex instance (entity {}, t {})", .0.entity, .0.t)]
    UnknownVertex(VertexInstance),

    #[error("infeasible synthetic spec: {0}")]
    Infeasible(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("chunk {chunk} needs {needed} bytes but the memory budget is {budget}")]
    OverBudget { chunk: usize, needed: u64, budget: u64 },

    #[error("plan does not match graph: {0}")]
    PlanMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
