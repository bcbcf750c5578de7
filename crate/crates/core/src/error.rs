use std::path::PathBuf;

/// Errors produced while building clouds, schemes, or running the solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate points: nodes {0} and {1} coincide")]
    DuplicatePoints(usize, usize),

    #[error("node {0} is a boundary node; the scheme is only evaluated at interior nodes")]
    BoundaryNode(usize),

    #[error("stencil does not provide {0}")]
    StencilUnavailable(String),

    #[error("{0} is not supported for this shape")]
    Unsupported(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered at node {0}")]
    NonFinite(usize),

    #[error("rejection sampling acceptance rate {0:.3e} is too low")]
    DegenerateShape(f64),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
