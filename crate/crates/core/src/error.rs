use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not numerically positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid problem instance: {0}")]
    InvalidInstance(String),

    #[error("bit allocation component {index} = {value} is outside the supported range")]
    BitsOutOfRange { index: usize, value: f64 },

    #[error("allocation is infeasible: {0}")]
    Infeasible(String),

    #[error("barrier is undefined at a boundary point: {0}")]
    NotInterior(String),

    #[error("empty gradient passed to the linear minimization oracle")]
    EmptyGradient,

    #[error("line search found no feasible decrease (outer {outer}, inner {inner}, mu {mu:e}, residual {residual:e})")]
    LineSearch {
        outer: usize,
        inner: usize,
        mu: f64,
        residual: f64,
    },

    #[error("evaluation failed at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("problem size {size} exceeds the limit {limit} for {what}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

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

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
