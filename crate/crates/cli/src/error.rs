use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Model {
        stage: String,
        #[source]
        source: linbayes::Error,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing upstream stage `{stage}`: {detail}")]
    MissingStage { stage: String, detail: String },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn model(stage: &str, source: linbayes::Error) -> Self {
        CliError::Model {
            stage: stage.to_string(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn missing(stage: &str, detail: impl Into<String>) -> Self {
        CliError::MissingStage {
            stage: stage.to_string(),
            detail: detail.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Model { .. } => 3,
            CliError::Io { .. } => 4,
            CliError::MissingStage { .. } => 5,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
