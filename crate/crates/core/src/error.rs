use thiserror::Error;

/// Errors raised by validation, the solvers and the data pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative entry {value} in {what} at {index}")]
    NegativeEntry {
        what: &'static str,
        index: String,
        value: f64,
    },

    #[error("non-finite entry in {0}")]
    NonFiniteInput(&'static str),

    #[error("{which} sums to {sum}, which is not within 1e-6 of 1")]
    MarginalSumOutOfRange { which: &'static str, sum: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid group partition: {0}")]
    InvalidGroups(String),

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error("max_iter must be at least 1")]
    ZeroIterations,

    #[error("numerical underflow in the Sinkhorn kernel; use the log-domain variant")]
    NumericalUnderflow,

    #[error("problem too large for the exhaustive oracle ({m}x{n})")]
    TooLarge { m: usize, n: usize },

    #[error("class {0} is empty in one of the point clouds")]
    EmptyClass(usize),

    #[error("point cloud: {0}")]
    InvalidPointCloud(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
