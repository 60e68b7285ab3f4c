use std::path::PathBuf;

use beamctl_core::session::Method;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] beamctl_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{method} step {index}: {source}")]
    Step {
        method: Method,
        /// 1-based.
        index: usize,
        #[source]
        source: beamctl_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
