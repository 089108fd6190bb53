use thiserror::Error;

use crate::checkpoint::CheckpointError;
use crate::config::{ConfigError, Section};
use crate::numeric::NumericError;
use crate::pipeline::Diagnostic;
use crate::stats::StatsError;
use crate::stream::{StreamError, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Invalid(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("component '{name}'{}: {source}", priority.map(|p| format!(" (priority {p})")).unwrap_or_default())]
    Component {
        name: String,
        priority: Option<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("component '{name}' has unknown type '{type_id}'")]
    UnknownType { name: String, type_id: String },
    #[error("components '{first}' and '{second}' share priority {priority}")]
    DuplicatePriority {
        first: String,
        second: String,
        priority: f64,
    },
    #[error("pipeline component '{0}' has no priority")]
    MissingPriority(String),
    #[error("configuration has no '{0}.task' section")]
    MissingTask(Section),
    #[error("handshake failed with {} diagnostic(s):\n{}", .0.len(), .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Handshake(Vec<Diagnostic>),
    #[error("loss '{name}' is not finite ({value})")]
    NonFiniteLoss { name: String, value: f64 },
    #[error("no loss component produced a value for section {0}")]
    NoLoss(Section),
    #[error("component wrote undeclared stream '{0}'")]
    UndeclaredOutput(String),
    #[error("batch validation failed: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    BatchViolations(Vec<Violation>),
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self::Invalid(message.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// Whether the failure is numerical (as opposed to configuration or I/O).
    pub fn is_numeric_failure(&self) -> bool {
        match self {
            Self::NonFiniteLoss { .. } | Self::Numeric(_) => true,
            Self::Component { source, .. } => source.is_numeric_failure(),
            _ => false,
        }
    }
}
