use thiserror::Error;

/// Errors raised by the estimator and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MmsbError {
    #[error("Dirichlet concentration must be positive, got {value} at index {index}")]
    NonPositiveAlpha { index: usize, value: f64 },

    #[error("community prior must be a probability vector (sum {sum})")]
    InvalidPrior { sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),

    #[error("invalid probability: {0}")]
    InvalidProbability(&'static str),

    #[error("too few nodes: need at least {required}, got {available}")]
    TooFewNodes { required: usize, available: usize },

    #[error("node sets overlap")]
    OverlappingSets,

    #[error("empty node set")]
    EmptyPartition,

    #[error("tensor of {requested} entries exceeds cap of {cap}")]
    CapExceeded { requested: usize, cap: usize },

    #[error("rank deficient: sigma_k / sigma_1 = {ratio:e}")]
    RankDeficient { ratio: f64 },

    #[error("truncated SVD did not converge after {iterations} iterations")]
    SvdNotConverged { iterations: usize },

    #[error("initializer is not a unit vector (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("no initializers supplied")]
    NoInitializers,

    #[error("power iteration produced a non-finite or zero iterate")]
    NonFiniteIterate,

    #[error("eigenvalue {value} at index {index} is not positive")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("degenerate separation: p = {p} must exceed q = {q}")]
    DegenerateSeparation { p: f64, q: f64 },

    #[error("community {community} has an all-zero membership row")]
    EmptyCommunity { community: usize },

    #[error("node index {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop at node {node}")]
    SelfLoop { node: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, MmsbError>;
