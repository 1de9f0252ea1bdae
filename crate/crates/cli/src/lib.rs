//! Command-line workflow around the `patchx` library: resolved run
//! configurations, run directories, the benchmark grid and explanation exports.

pub mod bench;
pub mod commands;
pub mod config;
pub mod run;

use std::path::PathBuf;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: patchx::Error,
    },
    #[error("{0}")]
    Core(#[from] patchx::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// Tags a library error with the pipeline stage that raised it.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for patchx::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

/// Writes a file, attaching the path to any I/O error.
pub(crate) fn write_file(path: impl Into<PathBuf>, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = path.into();
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

pub(crate) fn create_dir(path: impl Into<PathBuf>) -> Result<(), CliError> {
    let path = path.into();
    std::fs::create_dir_all(&path).map_err(|source| CliError::Io { path, source })
}
