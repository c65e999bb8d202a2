use std::path::PathBuf;

use clonelab_core::Error as CoreError;
use clonelab_measure::MeasureError;

pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("experiment error: {0}")]
    Experiment(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Resource(_) => EXIT_RESOURCE,
            CliError::Experiment(_) | CliError::Io { .. } | CliError::Serialize(_) => EXIT_INTERNAL,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_resource() {
            CliError::Resource(e.to_string())
        } else if e.is_parameter() {
            CliError::Config(e.to_string())
        } else {
            CliError::Experiment(e.to_string())
        }
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Resource(m) => CliError::Resource(m),
            MeasureError::Parameter(m) => CliError::Config(m),
            MeasureError::Dimension { .. } => CliError::Config(e.to_string()),
            other => CliError::Experiment(other.to_string()),
        }
    }
}

impl From<clonelab_core::error::Gf2Error> for CliError {
    fn from(e: clonelab_core::error::Gf2Error) -> Self {
        CoreError::from(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
