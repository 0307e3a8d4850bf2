use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, JpsaError>;

#[derive(Debug, Error)]
pub enum JpsaError {
    /// Caller supplied arguments that violate an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),

    /// A file did not match the expected on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// A solver produced a non-finite value or hit a singular system.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<JpsaError>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl JpsaError {
    pub fn input(msg: impl Into<String>) -> Self {
        JpsaError::Input(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        JpsaError::Format(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        JpsaError::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        JpsaError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attach a pipeline stage name to an error.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| JpsaError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
