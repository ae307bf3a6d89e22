use sensorspace_core::eval::EvalError;
use sensorspace_core::genesis::GenesisError;
use sensorspace_core::geometry::GeometryError;
use sensorspace_core::space::SpaceError;

use crate::config::ConfigError;
use crate::store::StoreError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or input data. Exit code 1.
    #[error("{0}")]
    Validation(String),
    /// Files could not be read or written. Exit code 2.
    #[error("{0}")]
    Io(String),
    /// The embedding provider or generator failed. Exit code 3.
    #[error("{0}")]
    Upstream(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Upstream(_) => 3,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{context}: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SpaceError> for CliError {
    fn from(e: SpaceError) -> Self {
        match e {
            SpaceError::Provider(_) => CliError::Upstream(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<GenesisError> for CliError {
    fn from(e: GenesisError) -> Self {
        match e {
            GenesisError::Space(s) => s.into(),
            GenesisError::GeneratorUnavailable(_) | GenesisError::GeneratorFailure(_) => {
                CliError::Upstream(e.to_string())
            }
            GenesisError::Io(e) => e.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Provider(_) => CliError::Upstream(e.to_string()),
            EvalError::Space(s) => s.into(),
            EvalError::Io(e) => e.into(),
            EvalError::Csv(ref c) if c.is_io_error() => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Invalid(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Io(e) => e.into(),
            StoreError::Corrupt { .. } => CliError::Validation(e.to_string()),
            StoreError::Space(s) => s.into(),
        }
    }
}
