use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed instance: {0}")]
    Malformed(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("instance too large for exhaustive evaluation: {0}")]
    TooLarge(String),

    #[error("instance is infeasible: {0}")]
    Infeasible(String),

    #[error("recourse function is not superadditive: {0}")]
    NotSuperadditive(String),

    #[error("resource limit reached without a feasible solution: {0}")]
    Limit(String),

    #[error("linear programming failure: {0}")]
    Lp(String),
}

pub type Result<T> = std::result::Result<T, Error>;
