use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("point {point:?} is not in face S(d={dim}, n={side}, k={face})")]
    NotInFace {
        point: Vec<i64>,
        dim: usize,
        side: usize,
        face: usize,
    },

    #[error("vertex set is not contained in the hypercube of side {side}")]
    NotInHypercube { side: usize },

    #[error("vertex set is not traceable with respect to the hypercube of side {side}")]
    NotTraceable { side: usize },

    #[error("size mismatch: expected {expected}, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("rank {rank} out of range for N = {size} (N! = {bound})")]
    RankOutOfRange { rank: u64, size: usize, bound: u64 },

    #[error("index {index} out of range 1..={size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("negative or non-finite rate {rate} on {what}")]
    InvalidRate { what: String, rate: f64 },

    #[error("resource cap exceeded: {what} needs {requested}, limit is {limit}")]
    ResourceCap {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    #[error(
        "eigensolver did not converge after {iterations} iterations \
         (ritz value {ritz}, residual {residual:e})"
    )]
    NotConverged {
        iterations: usize,
        ritz: f64,
        residual: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("postcondition violated: {0}")]
    Postcondition(String),

    #[error("hypothesis violated at k = {k}: {reason}")]
    Hypothesis { k: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
