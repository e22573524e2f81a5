use thiserror::Error;

/// Errors produced by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("solver diverged at iteration {iteration}: objective is not finite")]
    Divergence { iteration: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
