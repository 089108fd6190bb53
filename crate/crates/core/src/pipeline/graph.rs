use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use super::{Component, ComponentFactory, GradTable, InitContext, Mode, Role, Task, TaskDriver};
use crate::config::{resolve_component_config, ComponentConfig, ConfigError, ConfigTree, GlobalParams, Section};
use crate::pipeline::derive_seed;
use crate::stats::StatisticsCollector;
use crate::stream::{definition_satisfies, validate_batch, Batch, Definitions};
use crate::{Error, NDArray, ParameterStore, Result};

/// Experiment seed used when the configuration does not set `seed`.
pub const DEFAULT_SEED: u64 = 1337;

/// Top-level configuration key holding the experiment seed.
pub const SEED_KEY: &str = "seed";

/// A problem found while initializing or handshaking a pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    MissingStream {
        component: String,
        stream: String,
        priority: f64,
    },
    Incompatible {
        component: String,
        stream: String,
        priority: f64,
        produced: String,
        required: String,
    },
    Collision {
        stream: String,
        first: String,
        second: String,
    },
    UnknownRemap {
        component: String,
        name: String,
    },
    InvalidDefinition {
        component: String,
        stream: String,
    },
    DuplicateStatistic {
        key: String,
        first: String,
        second: String,
    },
    Initialization {
        component: String,
        message: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingStream {
                component,
                stream,
                priority,
            } => write!(
                f,
                "missing stream: '{component}' (priority {priority}) reads '{stream}', which no earlier component or task produces"
            ),
            Self::Incompatible {
                component,
                stream,
                priority,
                produced,
                required,
            } => write!(
                f,
                "incompatible definition: '{component}' (priority {priority}) requires '{stream}' as {required}, produced as {produced}"
            ),
            Self::Collision { stream, first, second } => {
                write!(f, "stream collision: '{stream}' produced by both '{first}' and '{second}'")
            }
            Self::UnknownRemap { component, name } => {
                write!(f, "'{component}' remaps unknown stream '{name}'")
            }
            Self::InvalidDefinition { component, stream } => {
                write!(f, "'{component}' declares an invalid definition for '{stream}'")
            }
            Self::DuplicateStatistic { key, first, second } => {
                write!(f, "statistic '{key}' collected by both '{first}' and '{second}'")
            }
            Self::Initialization { component, message } => {
                write!(f, "initialization of '{component}' failed: {message}")
            }
        }
    }
}

struct Entry {
    priority: f64,
    component: Box<dyn Component>,
}

impl Entry {
    fn active_in(&self, section: Section) -> bool {
        !self.component.config().disable.contains(&section)
    }

    fn wrap(&self, e: impl Into<Error>) -> Error {
        Error::Component {
            name: self.component.name().to_string(),
            priority: Some(self.priority),
            source: Box::new(e.into()),
        }
    }
}

fn remapped(cfg: &ComponentConfig, defs: Definitions) -> Definitions {
    defs.into_iter().map(|(k, v)| (cfg.stream(&k).to_string(), v)).collect()
}

/// Priority-ordered components plus the task of each section they run in.
pub struct Pipeline {
    seed: u64,
    validate_batches: bool,
    sections: Vec<Section>,
    tasks: BTreeMap<Section, Arc<dyn Task>>,
    entries: Vec<Entry>,
    failed: BTreeSet<String>,
}

/// Builds a pipeline fed by the task of a single section; components disabled
/// for that section are left out.
pub fn build_pipeline(config: &ConfigTree, factory: &ComponentFactory, section: Section) -> Result<Pipeline> {
    build_pipeline_for(config, factory, &[section])
}

/// Builds one set of component instances shared by several sections. Each
/// section gets its own task; components disabled in every requested section
/// are left out, the rest are skipped per section at run time.
pub fn build_pipeline_for(config: &ConfigTree, factory: &ComponentFactory, sections: &[Section]) -> Result<Pipeline> {
    let seed = match config.get(SEED_KEY) {
        None => DEFAULT_SEED,
        Some(v) => v
            .as_i64()
            .and_then(|s| u64::try_from(s).ok())
            .ok_or_else(|| ConfigError::InvalidValue {
                path: SEED_KEY.into(),
                message: format!("expected a non-negative integer, found '{v}'"),
            })?,
    };
    let validate_batches = match config.get("validate_batches") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| ConfigError::InvalidValue {
            path: "validate_batches".into(),
            message: "expected true or false".into(),
        })?,
    };

    let mut sections: Vec<Section> = sections.to_vec();
    sections.sort();
    sections.dedup();

    let mut tasks = BTreeMap::new();
    for &section in &sections {
        let path = format!("{section}.task");
        let tree = config.subtree(&path).ok_or(Error::MissingTask(section))?;
        let type_id = tree
            .get("type")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ConfigError::MissingKey {
                path: format!("{path}.type"),
            })?;
        let defaults = factory.task_defaults(type_id).ok_or_else(|| Error::UnknownType {
            name: path.clone(),
            type_id: type_id.to_string(),
        })?;
        let mut cfg = resolve_component_config(defaults, &tree, &path)?;
        cfg.seed = derive_seed(seed, &path);
        let task = factory
            .create_task(cfg)
            .expect("type checked above")
            .map_err(|e| Error::Component {
                name: path.clone(),
                priority: None,
                source: Box::new(e),
            })?;
        tasks.insert(section, Arc::from(task));
    }

    let mut configs = Vec::new();
    if let Some(pipeline) = config.get("pipeline") {
        let map = pipeline.as_map().ok_or_else(|| ConfigError::InvalidValue {
            path: "pipeline".into(),
            message: "expected a map of component sections".into(),
        })?;
        for (name, section_value) in map {
            let tree = section_value
                .as_map()
                .cloned()
                .map(ConfigTree::from_map)
                .ok_or_else(|| ConfigError::InvalidValue {
                    path: format!("pipeline.{name}"),
                    message: "expected a component section".into(),
                })?;
            let type_id = tree
                .get("type")
                .and_then(|v| v.as_str())
                .ok_or_else(|| ConfigError::MissingKey {
                    path: format!("pipeline.{name}.type"),
                })?;
            let defaults = factory.component_defaults(type_id).ok_or_else(|| Error::UnknownType {
                name: name.clone(),
                type_id: type_id.to_string(),
            })?;
            let mut cfg = resolve_component_config(defaults, &tree, name)?;
            let priority = cfg.priority.ok_or_else(|| Error::MissingPriority(name.clone()))?;
            cfg.seed = derive_seed(seed, name);
            configs.push((priority, cfg));
        }
    }
    configs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in configs.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicatePriority {
                first: pair[0].1.name.clone(),
                second: pair[1].1.name.clone(),
                priority: pair[0].0,
            });
        }
    }

    let mut entries = Vec::new();
    for (priority, cfg) in configs {
        if sections.iter().all(|s| cfg.disable.contains(s)) {
            continue;
        }
        let name = cfg.name.clone();
        let component = factory
            .create_component(cfg)
            .expect("type checked above")
            .map_err(|e| Error::Component {
                name,
                priority: Some(priority),
                source: Box::new(e),
            })?;
        entries.push(Entry { priority, component });
    }

    Ok(Pipeline {
        seed,
        validate_batches,
        sections,
        tasks,
        entries,
        failed: BTreeSet::new(),
    })
}

impl Pipeline {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn task(&self, section: Section) -> Option<&Arc<dyn Task>> {
        self.tasks.get(&section)
    }

    /// A fresh driver over the section's task.
    pub fn driver(&self, section: Section) -> Result<TaskDriver> {
        let task = self.tasks.get(&section).ok_or(Error::MissingTask(section))?;
        TaskDriver::new(task.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Names of the components executed for `section`, in execution order.
    pub fn execution_order(&self, section: Section) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.active_in(section))
            .map(|e| e.component.name())
            .collect()
    }

    pub fn component(&self, name: &str) -> Option<&dyn Component> {
        self.entries
            .iter()
            .find(|e| e.component.name() == name)
            .map(|e| e.component.as_ref())
    }

    pub fn component_mut(&mut self, name: &str) -> Option<&mut (dyn Component + 'static)> {
        self.entries
            .iter_mut()
            .find(|e| e.component.name() == name)
            .map(|e| e.component.as_mut())
    }

    /// Components owning parameters, as `(name, store)` in priority order.
    pub fn models(&self) -> Vec<(&str, &ParameterStore)> {
        self.entries
            .iter()
            .filter_map(|e| e.component.parameters().map(|p| (e.component.name(), p)))
            .collect()
    }

    pub fn models_mut(&mut self) -> Vec<(String, &mut ParameterStore)> {
        self.entries
            .iter_mut()
            .filter_map(|e| {
                let name = e.component.name().to_string();
                e.component.parameters_mut().map(|p| (name, p))
            })
            .collect()
    }

    pub fn zero_grads(&mut self) {
        for (_, store) in self.models_mut() {
            store.zero_grads();
        }
    }

    /// Names of the loss components active in `section`.
    pub fn loss_names(&self, section: Section) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|e| e.active_in(section) && e.component.role() == Role::Loss)
            .map(|e| e.component.name())
            .collect()
    }

    /// Statistic keys under which the active losses report their values.
    pub fn loss_statistic_keys(&self, section: Section) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.active_in(section) && e.component.role() == Role::Loss)
            .flat_map(|e| e.component.statistic_keys())
            .collect()
    }

    /// Per-loss weights from each loss component's `weight` parameter (default 1.0).
    pub fn configured_loss_weights(&self) -> BTreeMap<String, f64> {
        self.entries
            .iter()
            .filter(|e| e.component.role() == Role::Loss)
            .map(|e| {
                let cfg = e.component.config();
                (cfg.name.clone(), cfg.param_f64("weight").unwrap_or(1.0))
            })
            .collect()
    }

    /// Initializes tasks (in section order) and then components (by priority).
    /// Failures are returned as diagnostics; frozen flags from the
    /// configuration are applied to every parameter store.
    pub fn initialize(&mut self, globals: &mut GlobalParams, output_dir: Option<&Path>) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut ctx = InitContext { globals, output_dir };
        for task in self.tasks.values_mut() {
            let task = Arc::get_mut(task).expect("tasks are not shared before initialization");
            if let Err(e) = task.initialize(&mut ctx) {
                diags.push(Diagnostic::Initialization {
                    component: task.name().to_string(),
                    message: e.to_string(),
                });
                self.failed.insert(task.name().to_string());
            }
        }
        for entry in &mut self.entries {
            if let Err(e) = entry.component.initialize(&mut ctx) {
                diags.push(Diagnostic::Initialization {
                    component: entry.component.name().to_string(),
                    message: e.to_string(),
                });
                self.failed.insert(entry.component.name().to_string());
            }
            let frozen = entry.component.config().frozen;
            if let Some(store) = entry.component.parameters_mut() {
                store.set_frozen(frozen);
            }
        }
        diags
    }

    /// Walks the components of `section` in priority order checking that every
    /// input is produced earlier with a compatible definition. Reports every
    /// problem found.
    pub fn handshake(&self, section: Section) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let mut table: BTreeMap<String, (crate::stream::StreamDefinition, String)> = BTreeMap::new();
        if let Some(task) = self.tasks.get(&section) {
            let cfg = task.config();
            let outputs = task.output_definitions();
            for from in cfg.stream_remap.keys() {
                if !outputs.contains_key(from) {
                    diags.push(Diagnostic::UnknownRemap {
                        component: cfg.name.clone(),
                        name: from.clone(),
                    });
                }
            }
            for (stream, def) in remapped(cfg, outputs) {
                table.insert(stream, (def, cfg.name.clone()));
            }
        }
        let mut stat_owners: BTreeMap<String, String> = BTreeMap::new();
        for entry in self.entries.iter().filter(|e| e.active_in(section)) {
            let component = entry.component.as_ref();
            let cfg = component.config();
            let name = component.name();
            let failed = self.failed.contains(name);
            let inputs = component.input_definitions();
            let outputs = component.output_definitions();
            for from in cfg.stream_remap.keys() {
                if !inputs.contains_key(from) && !outputs.contains_key(from) {
                    diags.push(Diagnostic::UnknownRemap {
                        component: name.to_string(),
                        name: from.clone(),
                    });
                }
            }
            for (stream, required) in remapped(cfg, inputs) {
                match table.get(&stream) {
                    None => diags.push(Diagnostic::MissingStream {
                        component: name.to_string(),
                        stream,
                        priority: entry.priority,
                    }),
                    Some((produced, _)) if !failed && !definition_satisfies(produced, &required) => {
                        diags.push(Diagnostic::Incompatible {
                            component: name.to_string(),
                            stream,
                            priority: entry.priority,
                            produced: produced.to_string(),
                            required: required.to_string(),
                        })
                    }
                    Some(_) => {}
                }
            }
            for (stream, def) in remapped(cfg, outputs) {
                if !failed && !def.is_valid() {
                    diags.push(Diagnostic::InvalidDefinition {
                        component: name.to_string(),
                        stream: stream.clone(),
                    });
                }
                match table.get(&stream) {
                    Some((_, first)) => diags.push(Diagnostic::Collision {
                        stream,
                        first: first.clone(),
                        second: name.to_string(),
                    }),
                    None => {
                        table.insert(stream, (def, name.to_string()));
                    }
                }
            }
            for key in component.statistic_keys() {
                if let Some(first) = stat_owners.get(&key) {
                    diags.push(Diagnostic::DuplicateStatistic {
                        key,
                        first: first.clone(),
                        second: name.to_string(),
                    });
                } else {
                    stat_owners.insert(key, name.to_string());
                }
            }
        }
        diags
    }

    /// Executes the components of `section` in ascending priority.
    pub fn forward(&mut self, section: Section, mode: Mode, mut batch: Batch) -> Result<Batch> {
        if self.validate_batches {
            if let Some(task) = self.tasks.get(&section) {
                let defs = remapped(task.config(), task.output_definitions());
                let violations = validate_batch(&batch, &defs);
                if !violations.is_empty() {
                    return Err(Error::Component {
                        name: task.name().to_string(),
                        priority: None,
                        source: Box::new(Error::BatchViolations(violations)),
                    });
                }
            }
        }
        for entry in self.entries.iter_mut().filter(|e| e.active_in(section)) {
            let before = batch.len();
            entry.component.execute(&mut batch, mode).map_err(|e| entry.wrap(e))?;
            let outputs = remapped(entry.component.config(), entry.component.output_definitions());
            if let Some(extra) = batch.names().skip(before).find(|n| !outputs.contains_key(*n)) {
                return Err(entry.wrap(Error::UndeclaredOutput(extra.to_string())));
            }
            if self.validate_batches {
                let violations = validate_batch(&batch, &outputs);
                if !violations.is_empty() {
                    return Err(entry.wrap(Error::BatchViolations(violations)));
                }
            }
        }
        Ok(batch)
    }

    /// Back-propagates from every active loss (scaled by `loss_weights`,
    /// default 1.0) through differentiable components in descending priority.
    /// Components none of whose outputs carry a gradient are skipped.
    pub fn backward(
        &mut self,
        section: Section,
        batch: &Batch,
        loss_weights: &BTreeMap<String, f64>,
    ) -> Result<GradTable> {
        let mut grads = GradTable::new();
        let mut seeded = false;
        for entry in self
            .entries
            .iter()
            .filter(|e| e.active_in(section) && e.component.role() == Role::Loss)
        {
            let name = entry.component.name();
            let stream = entry.component.config().stream("loss");
            let value = batch.scalar(stream).map_err(|e| entry.wrap(e))?;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    name: name.to_string(),
                    value,
                });
            }
            let weight = loss_weights.get(name).copied().unwrap_or(1.0);
            grads.accumulate(stream, NDArray::scalar(weight))?;
            seeded = true;
        }
        if !seeded {
            return Err(Error::NoLoss(section));
        }
        for entry in self
            .entries
            .iter_mut()
            .rev()
            .filter(|e| e.active_in(section) && e.component.is_differentiable())
        {
            let cfg = entry.component.config();
            let receives = entry
                .component
                .output_definitions()
                .keys()
                .any(|k| grads.contains(cfg.stream(k)));
            if !receives {
                continue;
            }
            entry.component.backward(batch, &mut grads).map_err(|e| entry.wrap(e))?;
            let cfg = entry.component.config();
            for input in entry.component.input_definitions().keys() {
                let stream = cfg.stream(input);
                if let (Some(g), Ok(crate::stream::Value::Array(v))) = (grads.get(stream), batch.get(stream)) {
                    if g.shape() != v.shape() {
                        return Err(entry.wrap(crate::numeric::NumericError::ShapeMismatch {
                            left: v.shape().to_vec(),
                            right: g.shape().to_vec(),
                        }));
                    }
                }
            }
        }
        Ok(grads)
    }

    pub fn collect_statistics(
        &self,
        section: Section,
        batch: &Batch,
        collector: &mut StatisticsCollector,
    ) -> Result<()> {
        for entry in self.entries.iter().filter(|e| e.active_in(section)) {
            entry
                .component
                .collect_statistics(batch, collector)
                .map_err(|e| entry.wrap(e))?;
        }
        Ok(())
    }
}
