use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coverage spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "exact decomposition supports m <= {max_m} and d <= {max_d} (got m = {m}, d = {d}); \
         use the point-sampling estimator instead"
    )]
    DecompositionLimit {
        m: usize,
        d: usize,
        max_m: usize,
        max_d: usize,
    },

    #[error("tensor grid of {points}^{arity} points exceeds the limit of {limit} evaluations")]
    GridTooLarge { points: usize, arity: usize, limit: u64 },

    #[error("query point {0:?} lies outside the data domain")]
    OutOfDomain(Vec<f64>),

    #[error("malformed fraction {0:?}")]
    ParseRational(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by caller input, as opposed to I/O or internal failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidParameter(_)
                | Error::DecompositionLimit { .. }
                | Error::GridTooLarge { .. }
                | Error::OutOfDomain(_)
                | Error::ParseRational(_)
        )
    }
}
