use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{load_config, parse_override, ConfigTree, ConfigValue};
use crate::pipeline::{DEFAULT_SEED, SEED_KEY};
use crate::{Error, Result};

pub const CONFIG_COPY: &str = "training_configuration.yml";
pub const LOG_FILE: &str = "experiment.log";
pub const EXPORTS_DIR: &str = "exports";

/// Loads and merges `configs` left to right, then applies the experiment seed
/// and the `key.path=value` overrides, in that order.
pub fn assemble_config(configs: &[PathBuf], seed: Option<u64>, overrides: &[String]) -> Result<ConfigTree> {
    if configs.is_empty() {
        return Err(Error::invalid("no configuration file given"));
    }
    let mut tree = load_config(configs)?;
    match seed {
        Some(s) => tree.set(SEED_KEY, ConfigValue::Integer(s as i64)),
        None if !tree.contains(SEED_KEY) => tree.set(SEED_KEY, ConfigValue::Integer(DEFAULT_SEED as i64)),
        None => {}
    }
    for spec in overrides {
        let (key, value) = parse_override(spec)?;
        tree.set(&key, value);
    }
    Ok(tree)
}

/// Creates `<root>/<YYYYMMDD_HHMMSS>`, suffixed `_1`, `_2`, ... when taken.
pub fn create_experiment_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let stamp = chrono::Local::now().format("%Y%m%d_%H%M%S").to_string();
    let mut candidate = root.join(&stamp);
    let mut n = 0;
    loop {
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                n += 1;
                candidate = root.join(format!("{stamp}_{n}"));
            }
            Err(e) => return Err(Error::io(&candidate, e)),
        }
    }
}

/// Plain-text, level-prefixed experiment log. Lines are mirrored to the `log` facade.
pub struct ExperimentLog {
    file: Option<File>,
}

impl ExperimentLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { file: Some(file) })
    }

    /// A log that only forwards to the `log` facade.
    pub fn detached() -> Self {
        Self { file: None }
    }

    fn write(&mut self, level: log::Level, message: &str) {
        log::log!(level, "{message}");
        if let Some(f) = &mut self.file {
            let stamp = chrono::Local::now().format("%Y-%m-%d %H:%M:%S");
            // a failing log write must not abort the experiment
            let _ = writeln!(f, "{level:<5} {stamp} {message}");
        }
    }

    pub fn info(&mut self, message: impl AsRef<str>) {
        self.write(log::Level::Info, message.as_ref());
    }

    pub fn warn(&mut self, message: impl AsRef<str>) {
        self.write(log::Level::Warn, message.as_ref());
    }

    pub fn error(&mut self, message: impl AsRef<str>) {
        self.write(log::Level::Error, message.as_ref());
    }

    pub fn debug(&mut self, message: impl AsRef<str>) {
        self.write(log::Level::Debug, message.as_ref());
    }
}

/// Directory layout of one experiment run.
pub struct Experiment {
    pub dir: PathBuf,
    pub config: ConfigTree,
    pub log: ExperimentLog,
}

impl Experiment {
    /// Creates the run directory, saves the configuration copy and opens the log.
    pub fn create(root: &Path, config: ConfigTree) -> Result<Self> {
        let dir = create_experiment_dir(root)?;
        let copy = dir.join(CONFIG_COPY);
        fs::write(&copy, config.to_yaml_string()).map_err(|e| Error::io(&copy, e))?;
        let log = ExperimentLog::create(&dir.join(LOG_FILE))?;
        Ok(Self { dir, config, log })
    }

    pub fn exports_dir(&self) -> PathBuf {
        self.dir.join(EXPORTS_DIR)
    }
}
