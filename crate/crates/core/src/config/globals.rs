use std::collections::BTreeMap;

use super::{ConfigError, ConfigValue};

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalEntry {
    pub value: ConfigValue,
    pub publisher: String,
}

/// Write-once key/value store shared by components during initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalParams {
    entries: BTreeMap<String, GlobalEntry>,
}

impl GlobalParams {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `key`. Republishing an equal value is a no-op; a different value is a conflict.
    pub fn publish(&mut self, key: &str, value: ConfigValue, publisher: &str) -> Result<(), ConfigError> {
        if key.is_empty() {
            return Err(ConfigError::InvalidValue {
                path: "globals".into(),
                message: format!("{publisher} published an empty key"),
            });
        }
        match self.entries.get(key) {
            Some(existing) if existing.value == value => Ok(()),
            Some(existing) => Err(ConfigError::GlobalConflict {
                key: key.to_string(),
                existing: existing.value.to_string(),
                existing_publisher: existing.publisher.clone(),
                value: value.to_string(),
                publisher: publisher.to_string(),
            }),
            None => {
                self.entries.insert(
                    key.to_string(),
                    GlobalEntry {
                        value,
                        publisher: publisher.to_string(),
                    },
                );
                Ok(())
            }
        }
    }

    pub fn get(&self, key: &str) -> Result<&ConfigValue, ConfigError> {
        self.entries
            .get(key)
            .map(|e| &e.value)
            .ok_or_else(|| ConfigError::GlobalMissing(key.to_string()))
    }

    pub fn entry(&self, key: &str) -> Option<&GlobalEntry> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &GlobalEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_then_read() {
        let mut g = GlobalParams::new();
        g.publish("num_classes", 4i64.into(), "task").unwrap();
        assert_eq!(g.get("num_classes").unwrap(), &ConfigValue::Integer(4));
        assert_eq!(g.entry("num_classes").unwrap().publisher, "task");
    }

    #[test]
    fn equal_republish_is_noop() {
        let mut g = GlobalParams::new();
        g.publish("num_classes", 4i64.into(), "task").unwrap();
        g.publish("num_classes", 4i64.into(), "model").unwrap();
        assert_eq!(g.entry("num_classes").unwrap().publisher, "task");
    }

    #[test]
    fn conflicting_republish_names_both_publishers() {
        let mut g = GlobalParams::new();
        g.publish("num_classes", 4i64.into(), "task").unwrap();
        let err = g.publish("num_classes", 5i64.into(), "model").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("task") && msg.contains("model"), "{msg}");
    }

    #[test]
    fn missing_read_is_error() {
        assert!(matches!(
            GlobalParams::new().get("nope"),
            Err(ConfigError::GlobalMissing(_))
        ));
    }
}
