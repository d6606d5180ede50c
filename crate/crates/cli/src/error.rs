use argrid_core::engine::EngineError;
use argrid_core::stats::StatsError;
use std::path::Path;

/// A command failure, classified by whose fault it is.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, unreadable inputs, inconsistent parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// Valid configuration, but the data cannot support the request.
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        CliError::Data(msg.to_string())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Config(format!("{}: {e}", path.display()))
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Spatial(_)
            | EngineError::Ar(_)
            | EngineError::Window(_)
            | EngineError::Stats(StatsError::InvalidAlpha(_)) => CliError::config(e),
            _ => CliError::data(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
