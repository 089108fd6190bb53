//! Configuration registry: YAML loading with `default_configs` layering, deep
//! merging, per-component resolution and the write-once global parameter store.

mod component;
mod globals;
mod tree;
mod value;

use thiserror::Error;

pub use component::{resolve_component_config, ComponentConfig, LoadSpec, Section, RESERVED_KEYS};
pub use globals::{GlobalEntry, GlobalParams};
pub use tree::{load_config, merge, parse_override, ConfigTree, DEFAULT_CONFIGS_KEY, MAX_INCLUDE_DEPTH};
pub use value::{ConfigMap, ConfigValue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {file}: {message}")]
    Io { file: String, message: String },
    #[error("parse error in {file}{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        file: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{file}: top level must be a map, found {found}")]
    NotAMap { file: String, found: &'static str },
    #[error("default_configs cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("default_configs nesting deeper than {limit} at {file}")]
    DepthExceeded { file: String, limit: usize },
    #[error("missing required key '{path}'")]
    MissingKey { path: String },
    #[error("invalid value at '{path}': {message}")]
    InvalidValue { path: String, message: String },
    #[error("invalid override '{spec}': {message}")]
    InvalidOverride { spec: String, message: String },
    #[error("global '{key}' already published as {existing} by {existing_publisher}; {publisher} tried {value}")]
    GlobalConflict {
        key: String,
        existing: String,
        existing_publisher: String,
        value: String,
        publisher: String,
    },
    #[error("global '{0}' has not been published")]
    GlobalMissing(String),
}
