use std::collections::BTreeMap;
use std::fmt;

use serde_yaml::Value as Yaml;

pub type ConfigMap = BTreeMap<String, ConfigValue>;

/// A single configuration value. YAML `null` has no counterpart and is rejected on load.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    String(String),
    Integer(i64),
    Float(f64),
    Bool(bool),
    List(Vec<ConfigValue>),
    Map(ConfigMap),
}

impl ConfigValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::String(s) => Some(s),
            _ => None,
        }
    }

    /// Integers widen to floats.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Self::Integer(i) => Some(i as f64),
            Self::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Self::Integer(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        self.as_i64().and_then(|i| usize::try_from(i).ok())
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Self::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[ConfigValue]> {
        match self {
            Self::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&ConfigMap> {
        match self {
            Self::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::String(_) => "string",
            Self::Integer(_) => "integer",
            Self::Float(_) => "float",
            Self::Bool(_) => "boolean",
            Self::List(_) => "list",
            Self::Map(_) => "map",
        }
    }

    /// Accepts either a YAML list of strings or a comma-separated string.
    pub fn as_string_list(&self) -> Option<Vec<String>> {
        match self {
            Self::String(s) => Some(
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
            ),
            Self::List(items) => items.iter().map(|v| v.as_str().map(String::from)).collect(),
            _ => None,
        }
    }

    pub(crate) fn from_yaml(value: Yaml) -> Result<Self, String> {
        Ok(match value {
            Yaml::Null => return Err("null values are not supported".into()),
            Yaml::Bool(b) => Self::Bool(b),
            Yaml::Number(n) => match n.as_i64() {
                Some(i) => Self::Integer(i),
                None => Self::Float(n.as_f64().ok_or("number out of range")?),
            },
            Yaml::String(s) => Self::String(s),
            Yaml::Sequence(items) => Self::List(items.into_iter().map(Self::from_yaml).collect::<Result<_, _>>()?),
            Yaml::Mapping(map) => {
                let mut out = ConfigMap::new();
                for (k, v) in map {
                    let key = match k {
                        Yaml::String(s) => s,
                        Yaml::Number(n) => n.to_string(),
                        Yaml::Bool(b) => b.to_string(),
                        other => return Err(format!("unsupported map key {other:?}")),
                    };
                    let v = Self::from_yaml(v).map_err(|e| format!("{key}: {e}"))?;
                    out.insert(key, v);
                }
                Self::Map(out)
            }
            Yaml::Tagged(t) => return Err(format!("YAML tags are not supported ({})", t.tag)),
        })
    }

    pub(crate) fn to_yaml(&self) -> Yaml {
        match self {
            Self::String(s) => Yaml::String(s.clone()),
            Self::Integer(i) => Yaml::Number((*i).into()),
            Self::Float(f) => Yaml::Number((*f).into()),
            Self::Bool(b) => Yaml::Bool(*b),
            Self::List(l) => Yaml::Sequence(l.iter().map(Self::to_yaml).collect()),
            Self::Map(m) => Yaml::Mapping(m.iter().map(|(k, v)| (Yaml::String(k.clone()), v.to_yaml())).collect()),
        }
    }
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::String(s) => f.write_str(s),
            Self::Integer(i) => write!(f, "{i}"),
            Self::Float(x) => write!(f, "{x}"),
            Self::Bool(b) => write!(f, "{b}"),
            other => {
                let s = serde_yaml::to_string(&other.to_yaml()).map_err(|_| fmt::Error)?;
                f.write_str(s.trim_end())
            }
        }
    }
}

impl From<&str> for ConfigValue {
    fn from(s: &str) -> Self {
        Self::String(s.to_string())
    }
}

impl From<String> for ConfigValue {
    fn from(s: String) -> Self {
        Self::String(s)
    }
}

impl From<i64> for ConfigValue {
    fn from(i: i64) -> Self {
        Self::Integer(i)
    }
}

impl From<usize> for ConfigValue {
    fn from(i: usize) -> Self {
        Self::Integer(i as i64)
    }
}

impl From<f64> for ConfigValue {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<bool> for ConfigValue {
    fn from(b: bool) -> Self {
        Self::Bool(b)
    }
}
