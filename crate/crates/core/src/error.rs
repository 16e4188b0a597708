use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A quantity is undefined for the given inputs (coincident points,
    /// singular exponents, divergent series, zero variance).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("instance too large: {links} links exceeds the limit of {limit}")]
    Size { links: usize, limit: usize },

    #[error("topology generation failed: {0}")]
    Generation(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
