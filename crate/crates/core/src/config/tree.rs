use std::fs;
use std::path::{Path, PathBuf};

use super::{ConfigError, ConfigMap, ConfigValue};

/// Key under which a file lists the files it layers on top of.
pub const DEFAULT_CONFIGS_KEY: &str = "default_configs";

/// Maximum nesting of `default_configs` references.
pub const MAX_INCLUDE_DEPTH: usize = 32;

/// Hierarchical configuration document addressed with dotted paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigTree {
    root: ConfigMap,
}

impl ConfigTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(root: ConfigMap) -> Self {
        Self { root }
    }

    /// Parses a YAML document whose top level must be a map. An empty document is an empty tree.
    pub fn from_yaml_str(src: &str, origin: &str) -> Result<Self, ConfigError> {
        let yaml: serde_yaml::Value = serde_yaml::from_str(src).map_err(|e| ConfigError::Parse {
            file: origin.to_string(),
            line: e.location().map(|l| l.line()),
            message: e.to_string(),
        })?;
        if yaml.is_null() {
            return Ok(Self::new());
        }
        match ConfigValue::from_yaml(yaml) {
            Ok(ConfigValue::Map(root)) => Ok(Self { root }),
            Ok(other) => Err(ConfigError::NotAMap {
                file: origin.to_string(),
                found: other.kind(),
            }),
            Err(message) => Err(ConfigError::Parse {
                file: origin.to_string(),
                line: None,
                message,
            }),
        }
    }

    pub fn to_yaml_string(&self) -> String {
        serde_yaml::to_string(&ConfigValue::Map(self.root.clone()).to_yaml()).expect("config trees always serialize")
    }

    pub fn root(&self) -> &ConfigMap {
        &self.root
    }

    pub fn into_map(self) -> ConfigMap {
        self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&ConfigValue> {
        let mut parts = path.split('.');
        let mut cur = self.root.get(parts.next()?)?;
        for part in parts {
            cur = cur.as_map()?.get(part)?;
        }
        Some(cur)
    }

    pub fn contains(&self, path: &str) -> bool {
        self.get(path).is_some()
    }

    /// The map at `path` as its own tree.
    pub fn subtree(&self, path: &str) -> Option<ConfigTree> {
        self.get(path)?.as_map().cloned().map(Self::from_map)
    }

    /// Sets `path`, creating (or replacing non-map) intermediate levels.
    pub fn set(&mut self, path: &str, value: ConfigValue) {
        let parts: Vec<&str> = path.split('.').collect();
        let (last, init) = parts.split_last().expect("split yields at least one part");
        let mut map = &mut self.root;
        for part in init {
            let slot = map
                .entry((*part).to_string())
                .or_insert_with(|| ConfigValue::Map(ConfigMap::new()));
            if !matches!(slot, ConfigValue::Map(_)) {
                *slot = ConfigValue::Map(ConfigMap::new());
            }
            map = match slot {
                ConfigValue::Map(m) => m,
                _ => unreachable!(),
            };
        }
        map.insert((*last).to_string(), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<ConfigValue> {
        self.root.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.root.keys().map(String::as_str)
    }
}

fn merge_maps(base: &ConfigMap, over: &ConfigMap) -> ConfigMap {
    let mut out = base.clone();
    for (k, v) in over {
        let merged = match (out.get(k), v) {
            (Some(ConfigValue::Map(b)), ConfigValue::Map(o)) => ConfigValue::Map(merge_maps(b, o)),
            _ => v.clone(),
        };
        out.insert(k.clone(), merged);
    }
    out
}

/// Deep merge: nested maps merge recursively, everything else in `over` replaces `base`.
pub fn merge(base: &ConfigTree, over: &ConfigTree) -> ConfigTree {
    ConfigTree {
        root: merge_maps(&base.root, &over.root),
    }
}

/// Loads and merges configuration files left to right; later files win.
pub fn load_config<P: AsRef<Path>>(paths: &[P]) -> Result<ConfigTree, ConfigError> {
    let mut acc = ConfigTree::new();
    for path in paths {
        let tree = load_file(path.as_ref(), &mut Vec::new())?;
        acc = merge(&acc, &tree);
    }
    Ok(acc)
}

fn load_file(path: &Path, chain: &mut Vec<PathBuf>) -> Result<ConfigTree, ConfigError> {
    if chain.len() > MAX_INCLUDE_DEPTH {
        return Err(ConfigError::DepthExceeded {
            file: path.display().to_string(),
            limit: MAX_INCLUDE_DEPTH,
        });
    }
    let canonical = fs::canonicalize(path).map_err(|e| ConfigError::Io {
        file: path.display().to_string(),
        message: e.to_string(),
    })?;
    if chain.contains(&canonical) {
        let mut cycle: Vec<String> = chain.iter().map(|p| p.display().to_string()).collect();
        cycle.push(canonical.display().to_string());
        return Err(ConfigError::Cycle(cycle));
    }
    let src = fs::read_to_string(&canonical).map_err(|e| ConfigError::Io {
        file: canonical.display().to_string(),
        message: e.to_string(),
    })?;
    let mut tree = ConfigTree::from_yaml_str(&src, &canonical.display().to_string())?;
    let Some(defaults) = tree.remove(DEFAULT_CONFIGS_KEY) else {
        return Ok(tree);
    };
    let refs = defaults.as_string_list().ok_or_else(|| ConfigError::InvalidValue {
        path: DEFAULT_CONFIGS_KEY.into(),
        message: format!("expected comma-separated paths in {}", canonical.display()),
    })?;
    let dir = canonical.parent().unwrap_or(Path::new("."));
    chain.push(canonical.clone());
    let mut base = ConfigTree::new();
    for r in refs {
        let included = load_file(&dir.join(r), chain)?;
        base = merge(&base, &included);
    }
    chain.pop();
    Ok(merge(&base, &tree))
}

/// Parses a `key.path=value` override; the value is read as a YAML scalar or flow collection.
pub fn parse_override(spec: &str) -> Result<(String, ConfigValue), ConfigError> {
    let invalid = |why: &str| ConfigError::InvalidOverride {
        spec: spec.to_string(),
        message: why.to_string(),
    };
    let (key, raw) = spec.split_once('=').ok_or_else(|| invalid("expected key.path=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(invalid("empty key segment"));
    }
    let value = if raw.trim().is_empty() {
        ConfigValue::String(String::new())
    } else {
        let yaml: serde_yaml::Value = serde_yaml::from_str(raw).map_err(|e| invalid(&e.to_string()))?;
        ConfigValue::from_yaml(yaml).map_err(|e| invalid(&e))?
    };
    Ok((key.to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(src: &str) -> ConfigTree {
        ConfigTree::from_yaml_str(src, "test").unwrap()
    }

    #[test]
    fn deep_merge() {
        let merged = merge(&tree("{a: 1, b: {c: 2}}"), &tree("{b: {c: 3, d: 4}}"));
        assert_eq!(merged, tree("{a: 1, b: {c: 3, d: 4}}"));
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let t = tree("{a: 1, b: {c: [1, 2]}}");
        assert_eq!(merge(&t, &ConfigTree::new()), t);
        assert_eq!(merge(&ConfigTree::new(), &t), t);
    }

    #[test]
    fn lists_replace() {
        let merged = merge(&tree("{l: [1, 2]}"), &tree("{l: [9]}"));
        assert_eq!(merged, tree("{l: [9]}"));
    }

    #[test]
    fn scalar_replaced_by_map_and_back() {
        let merged = merge(&tree("{a: 1}"), &tree("{a: {b: 2}}"));
        assert_eq!(merged.get("a.b"), Some(&ConfigValue::Integer(2)));
        let merged = merge(&merged, &tree("{a: x}"));
        assert_eq!(merged.get("a"), Some(&ConfigValue::from("x")));
    }

    #[test]
    fn dotted_paths() {
        let mut t = tree("{training: {task: {type: blobs}}}");
        assert_eq!(t.get("training.task.type").unwrap().as_str(), Some("blobs"));
        assert!(t.get("training.task.missing").is_none());
        assert!(t.get("training.task.type.deeper").is_none());
        t.set("training.task.batch_size", 64i64.into());
        t.set("new.branch", true.into());
        assert_eq!(t.get("training.task.batch_size").unwrap().as_i64(), Some(64));
        assert_eq!(t.get("new.branch").unwrap().as_bool(), Some(true));
    }

    #[test]
    fn rejects_non_map_top_level() {
        assert!(matches!(
            ConfigTree::from_yaml_str("[1, 2]", "x.yml"),
            Err(ConfigError::NotAMap { .. })
        ));
    }

    #[test]
    fn parse_error_has_line() {
        let err = ConfigTree::from_yaml_str("a: 1\nb: [1, 2\nc: 3\n", "bad.yml").unwrap_err();
        match err {
            ConfigError::Parse { file, line, .. } => {
                assert_eq!(file, "bad.yml");
                assert!(line.is_some());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overrides_parse_as_yaml_scalars() {
        let (k, v) = parse_override("training.task.batch_size=64").unwrap();
        assert_eq!(k, "training.task.batch_size");
        assert_eq!(v, ConfigValue::Integer(64));
        assert_eq!(parse_override("a.b=0.5").unwrap().1, ConfigValue::Float(0.5));
        assert_eq!(parse_override("a=[1, 2]").unwrap().1.as_list().unwrap().len(), 2);
        assert_eq!(parse_override("a=hello").unwrap().1, ConfigValue::from("hello"));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn yaml_round_trip() {
        let t = tree("{a: 1, b: {c: 2.5, d: [x, true]}, e: hello}");
        assert_eq!(tree(&t.to_yaml_string()), t);
    }
}
