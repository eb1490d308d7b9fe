use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("distance matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("space must contain at least one point")]
    EmptySpace,

    #[error("mass vector has length {found}, expected {expected}")]
    MassLength { expected: usize, found: usize },

    #[error("labels have length {found}, expected {expected}")]
    LabelLength { expected: usize, found: usize },

    #[error("mass at index {index} must be strictly positive, got {value}")]
    NonPositiveMass { index: usize, value: f64 },

    #[error("total mass must be positive, got {0}")]
    NonPositiveTotalMass(f64),

    #[error("non-finite coordinate at point {row}, dimension {col}")]
    NonFiniteCoordinate { row: usize, col: usize },

    #[error("edge ({i}, {j}) out of range for {n_nodes} nodes")]
    EdgeOutOfRange { i: usize, j: usize, n_nodes: usize },

    #[error("edge ({i}, {j}) has nonpositive length {length}")]
    NonPositiveEdgeLength { i: usize, j: usize, length: f64 },

    #[error("subsample size {size} out of range 1..={k}")]
    SubsampleSize { size: usize, k: usize },

    #[error("rho must be positive, got {0}")]
    NonPositiveRho(f64),

    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("vector has length {found}, expected {expected}")]
    VectorLength { expected: usize, found: usize },

    #[error("eigensolver failed to converge on a {size}x{size} matrix (max |entry| = {max_abs:.3e})")]
    EigenFailed { size: usize, max_abs: f64 },

    #[error("auxiliary graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("space never becomes connected: {components} components remain as rho grows")]
    NeverConnected { components: usize },

    #[error("k_prime {k_prime} out of range 1..={k}")]
    KPrimeOutOfRange { k_prime: usize, k: usize },

    #[error("quantile grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),

    #[error("no finite pairwise distance to build a grid from")]
    NoFiniteDistances,

    #[error("samples use different quantile grids")]
    GridMismatch,

    #[error("need at least {needed} curves, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("eigenvalue index {which} out of range 1..={k_prime}")]
    WhichOutOfRange { which: usize, k_prime: usize },

    #[error("sign-region fraction q must lie in (0, 1), got {0}")]
    InvalidQ(f64),

    #[error("tau must be positive, got {0}")]
    NonPositiveTau(f64),

    #[error("labelled set is empty")]
    NoLabels,

    #[error("label index {index} out of range for {k} nodes")]
    LabelOutOfRange { index: usize, k: usize },

    #[error("label at node {index} must be +1 or -1, got {value}")]
    InvalidLabel { index: usize, value: i8 },

    #[error("linear solve failed: system matrix is not positive definite")]
    LinearSolveFailed,

    #[error("bootstrap needs at least one replicate")]
    NoReplicates,

    #[error("embedding dimension must be at least 1")]
    ZeroDims,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
