use thiserror::Error;

use crate::graph::{EdgeId, VertexId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("self-loop at vertex `{0}`")]
    SelfLoop(String),

    #[error("graph is disconnected: vertex `{0}` is unreachable from the first vertex")]
    Disconnected(String),

    #[error("duplicate vertex name `{0}`")]
    DuplicateVertexName(String),

    #[error("edge endpoint `{0}` is not a declared vertex")]
    UnknownEndpoint(String),

    #[error("a network needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("vertex index {0} out of range")]
    UnknownVertex(VertexId),

    #[error("edge {0} is not in the graph")]
    EdgeNotInGraph(EdgeId),

    #[error("endpoints must be distinct (both are vertex {0})")]
    SameVertex(VertexId),

    #[error("not a spanning tree: {0}")]
    NotASpanningTree(String),

    #[error("invalid walk: {0}")]
    InvalidWalk(String),

    #[error("enumeration exceeded the limit of {0} items")]
    SizeLimitExceeded(usize),

    #[error("edge {edge} has invalid resistance {value} (must be finite and >= 1e-12)")]
    InvalidResistance { edge: EdgeId, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("reduced system is singular")]
    SingularSystem,

    #[error("variance at index {index} must be positive, got {value}")]
    NonpositiveVariance { index: usize, value: f64 },

    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),

    #[error("covariance is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("constraint is inconsistent: zero-variance direction with offset {0:e}")]
    InconsistentConstraint(f64),

    #[error("degenerate entropy for `{0}`: variance collapsed to zero")]
    DegenerateEntropy(String),

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
