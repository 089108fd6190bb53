use std::collections::BTreeMap;

use super::{Component, Task};
use crate::config::{merge, ComponentConfig, ConfigError, ConfigTree};
use crate::Result;

/// Defaults shared by every task type.
pub const TASK_COMMON_DEFAULTS: &str = "
batch_size: 64
sampler:
  type: sequential
";

type ComponentCtor = Box<dyn Fn(ComponentConfig) -> Result<Box<dyn Component>> + Send + Sync>;
type TaskCtor = Box<dyn Fn(ComponentConfig) -> Result<Box<dyn Task>> + Send + Sync>;

struct Registration<C> {
    defaults: ConfigTree,
    ctor: C,
}

/// Maps `type:` identifiers to constructors and their default configuration.
#[derive(Default)]
pub struct ComponentFactory {
    components: BTreeMap<String, Registration<ComponentCtor>>,
    tasks: BTreeMap<String, Registration<TaskCtor>>,
}

impl ComponentFactory {
    /// An empty factory.
    pub fn new() -> Self {
        Self::default()
    }

    /// A factory with every built-in component and task registered.
    pub fn with_zoo() -> Self {
        let mut f = Self::new();
        crate::zoo::register_all(&mut f);
        f
    }

    pub fn register_component<F>(&mut self, type_id: &str, defaults_yaml: &str, ctor: F) -> Result<(), ConfigError>
    where
        F: Fn(ComponentConfig) -> Result<Box<dyn Component>> + Send + Sync + 'static,
    {
        let defaults = ConfigTree::from_yaml_str(defaults_yaml, &format!("<defaults of {type_id}>"))?;
        self.components.insert(
            type_id.to_string(),
            Registration {
                defaults,
                ctor: Box::new(ctor),
            },
        );
        Ok(())
    }

    /// Registers a task type; its defaults are layered over [`TASK_COMMON_DEFAULTS`].
    pub fn register_task<F>(&mut self, type_id: &str, defaults_yaml: &str, ctor: F) -> Result<(), ConfigError>
    where
        F: Fn(ComponentConfig) -> Result<Box<dyn Task>> + Send + Sync + 'static,
    {
        let common = ConfigTree::from_yaml_str(TASK_COMMON_DEFAULTS, "<task defaults>")?;
        let own = ConfigTree::from_yaml_str(defaults_yaml, &format!("<defaults of {type_id}>"))?;
        self.tasks.insert(
            type_id.to_string(),
            Registration {
                defaults: merge(&common, &own),
                ctor: Box::new(ctor),
            },
        );
        Ok(())
    }

    pub fn component_defaults(&self, type_id: &str) -> Option<&ConfigTree> {
        self.components.get(type_id).map(|r| &r.defaults)
    }

    pub fn task_defaults(&self, type_id: &str) -> Option<&ConfigTree> {
        self.tasks.get(type_id).map(|r| &r.defaults)
    }

    pub fn component_types(&self) -> impl Iterator<Item = &str> {
        self.components.keys().map(String::as_str)
    }

    pub fn task_types(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub(crate) fn create_component(&self, cfg: ComponentConfig) -> Option<Result<Box<dyn Component>>> {
        self.components.get(&cfg.type_id).map(|r| (r.ctor)(cfg))
    }

    pub(crate) fn create_task(&self, cfg: ComponentConfig) -> Option<Result<Box<dyn Task>>> {
        self.tasks.get(&cfg.type_id).map(|r| (r.ctor)(cfg))
    }
}
