use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::{merge, ConfigError, ConfigTree, ConfigValue};

/// Keys interpreted by the framework rather than by the component itself.
pub const RESERVED_KEYS: [&str; 7] = ["type", "priority", "streams", "globals", "freeze", "load", "disable"];

/// Experiment phase; selects the task that feeds the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Section {
    Training,
    Validation,
    Test,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Training, Section::Validation, Section::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Training => "training",
            Self::Validation => "validation",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Section {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "training" => Ok(Self::Training),
            "validation" => Ok(Self::Validation),
            "test" => Ok(Self::Test),
            other => Err(ConfigError::InvalidValue {
                path: "section".into(),
                message: format!("unknown section '{other}'"),
            }),
        }
    }
}

/// Where to import a component's parameters from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub file: PathBuf,
    /// Name of the model inside the checkpoint.
    pub model: String,
}

/// A component's resolved configuration section.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentConfig {
    pub name: String,
    pub type_id: String,
    pub priority: Option<f64>,
    pub stream_remap: BTreeMap<String, String>,
    pub global_remap: BTreeMap<String, String>,
    pub frozen: bool,
    pub load_from: Option<LoadSpec>,
    pub disable: Vec<Section>,
    /// Type defaults merged with the experiment section.
    pub params: ConfigTree,
    /// Per-component RNG seed derived from the experiment seed and the component name.
    pub seed: u64,
}

impl ComponentConfig {
    /// Actual name of a stream the component knows as `default`.
    pub fn stream<'a>(&'a self, default: &'a str) -> &'a str {
        self.stream_remap.get(default).map_or(default, String::as_str)
    }

    /// Actual key of a global the component knows as `default`.
    pub fn global<'a>(&'a self, default: &'a str) -> &'a str {
        self.global_remap.get(default).map_or(default, String::as_str)
    }

    fn param(&self, key: &str) -> Result<&ConfigValue, ConfigError> {
        self.params.get(key).ok_or_else(|| ConfigError::MissingKey {
            path: format!("{}.{key}", self.name),
        })
    }

    fn invalid(&self, key: &str, expected: &str, found: &ConfigValue) -> ConfigError {
        ConfigError::InvalidValue {
            path: format!("{}.{key}", self.name),
            message: format!("expected {expected}, found {} '{found}'", found.kind()),
        }
    }

    pub fn param_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.param(key)?;
        v.as_f64().ok_or_else(|| self.invalid(key, "a number", v))
    }

    pub fn param_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.param(key)?;
        v.as_usize()
            .ok_or_else(|| self.invalid(key, "a non-negative integer", v))
    }

    pub fn param_i64(&self, key: &str) -> Result<i64, ConfigError> {
        let v = self.param(key)?;
        v.as_i64().ok_or_else(|| self.invalid(key, "an integer", v))
    }

    pub fn param_bool(&self, key: &str) -> Result<bool, ConfigError> {
        let v = self.param(key)?;
        v.as_bool().ok_or_else(|| self.invalid(key, "a boolean", v))
    }

    pub fn param_str(&self, key: &str) -> Result<&str, ConfigError> {
        let v = self.param(key)?;
        v.as_str().ok_or_else(|| self.invalid(key, "a string", v))
    }

    pub fn param_strings(&self, key: &str) -> Result<Vec<String>, ConfigError> {
        let v = self.param(key)?;
        v.as_string_list()
            .ok_or_else(|| self.invalid(key, "a list of strings", v))
    }

    pub fn param_usizes(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        let v = self.param(key)?;
        v.as_list()
            .and_then(|l| l.iter().map(ConfigValue::as_usize).collect())
            .ok_or_else(|| self.invalid(key, "a list of non-negative integers", v))
    }

    pub fn param_f64s(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.param(key)?;
        v.as_list()
            .and_then(|l| l.iter().map(ConfigValue::as_f64).collect())
            .ok_or_else(|| self.invalid(key, "a list of numbers", v))
    }
}

fn string_table(section: &ConfigTree, key: &str, name: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let Some(value) = section.get(key) else {
        return Ok(BTreeMap::new());
    };
    let invalid = |message: String| ConfigError::InvalidValue {
        path: format!("{name}.{key}"),
        message,
    };
    let map = value
        .as_map()
        .ok_or_else(|| invalid(format!("expected a map, found {}", value.kind())))?;
    map.iter()
        .map(|(from, to)| match to.as_str() {
            Some(s) if !s.trim().is_empty() => Ok((from.clone(), s.to_string())),
            _ => Err(invalid(format!("'{from}' must map to a nonempty name"))),
        })
        .collect()
}

fn load_spec(section: &ConfigTree, name: &str) -> Result<Option<LoadSpec>, ConfigError> {
    let invalid = |message: &str| ConfigError::InvalidValue {
        path: format!("{name}.load"),
        message: message.to_string(),
    };
    match section.get("load") {
        None => Ok(None),
        Some(ConfigValue::String(s)) if !s.is_empty() => Ok(Some(LoadSpec {
            file: PathBuf::from(s),
            model: name.to_string(),
        })),
        Some(ConfigValue::Map(m)) => {
            let file = m
                .get("file")
                .and_then(ConfigValue::as_str)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| invalid("missing 'file'"))?;
            let model = match m.get("model") {
                None => name.to_string(),
                Some(v) => v
                    .as_str()
                    .ok_or_else(|| invalid("'model' must be a string"))?
                    .to_string(),
            };
            Ok(Some(LoadSpec {
                file: PathBuf::from(file),
                model,
            }))
        }
        Some(_) => Err(invalid("expected a checkpoint path or {file, model}")),
    }
}

/// Combines a component type's defaults with its experiment section.
pub fn resolve_component_config(
    type_defaults: &ConfigTree,
    experiment_section: &ConfigTree,
    name: &str,
) -> Result<ComponentConfig, ConfigError> {
    let type_id = experiment_section
        .get("type")
        .ok_or_else(|| ConfigError::MissingKey {
            path: format!("{name}.type"),
        })?
        .as_str()
        .ok_or_else(|| ConfigError::InvalidValue {
            path: format!("{name}.type"),
            message: "expected a string".into(),
        })?
        .to_string();
    let priority = match experiment_section.get("priority") {
        None => None,
        Some(v) => match v.as_f64() {
            Some(p) if p.is_finite() => Some(p),
            _ => {
                return Err(ConfigError::InvalidValue {
                    path: format!("{name}.priority"),
                    message: format!("expected a finite number, found '{v}'"),
                })
            }
        },
    };
    let frozen = match experiment_section.get("freeze") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| ConfigError::InvalidValue {
            path: format!("{name}.freeze"),
            message: "expected true or false".into(),
        })?,
    };
    let disable = match experiment_section.get("disable") {
        None => Vec::new(),
        Some(v) => v
            .as_string_list()
            .ok_or_else(|| ConfigError::InvalidValue {
                path: format!("{name}.disable"),
                message: "expected a list of sections".into(),
            })?
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?,
    };
    for key in experiment_section.keys() {
        if !RESERVED_KEYS.contains(&key) && !type_defaults.contains(key) {
            log::warn!("{name}: ignoring unknown key '{key}' for component type '{type_id}'");
        }
    }
    Ok(ComponentConfig {
        name: name.to_string(),
        stream_remap: string_table(experiment_section, "streams", name)?,
        global_remap: string_table(experiment_section, "globals", name)?,
        load_from: load_spec(experiment_section, name)?,
        params: merge(type_defaults, experiment_section),
        type_id,
        priority,
        frozen,
        disable,
        seed: 0,
    })
}
