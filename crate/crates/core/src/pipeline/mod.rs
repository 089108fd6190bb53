//! Components, tasks, and the priority-ordered pipeline that wires them together.

mod driver;
mod factory;
mod grad;
mod graph;
mod sampler;

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{ComponentConfig, ConfigValue, GlobalParams};
use crate::numeric::DropoutMode;
use crate::stats::StatisticsCollector;
use crate::stream::{Batch, Definitions};
use crate::{Error, ParameterStore, Result};

pub use driver::{BatchIter, TaskDriver};
pub use factory::{ComponentFactory, TASK_COMMON_DEFAULTS};
pub use grad::GradTable;
pub use graph::{build_pipeline, build_pipeline_for, Diagnostic, Pipeline, DEFAULT_SEED, SEED_KEY};
pub use sampler::{Sampler, SamplerKind};

/// What a component declares itself to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Owns trainable parameters.
    Model,
    /// Produces a scalar `loss` stream gradients start from.
    Loss,
    Transform,
    Statistic,
    Viewer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn dropout(self) -> DropoutMode {
        match self {
            Self::Train => DropoutMode::Train,
            Self::Eval => DropoutMode::Eval,
        }
    }
}

/// Everything a component may touch while initializing.
pub struct InitContext<'a> {
    pub globals: &'a mut GlobalParams,
    /// Directory for files a component writes (exports); `None` outside experiments.
    pub output_dir: Option<&'a Path>,
}

impl InitContext<'_> {
    /// Reads a global through the component's `globals:` remap.
    pub fn global(&self, cfg: &ComponentConfig, key: &str) -> Result<&ConfigValue> {
        Ok(self.globals.get(cfg.global(key))?)
    }

    pub fn global_usize(&self, cfg: &ComponentConfig, key: &str) -> Result<usize> {
        let actual = cfg.global(key);
        let v = self.globals.get(actual)?;
        v.as_usize()
            .ok_or_else(|| Error::invalid(format!("global '{actual}' is not a non-negative integer: {v}")))
    }

    pub fn publish(&mut self, cfg: &ComponentConfig, key: &str, value: ConfigValue) -> Result<()> {
        Ok(self.globals.publish(cfg.global(key), value, &cfg.name)?)
    }
}

/// A pipeline node. Definitions use the component's default stream names;
/// the pipeline applies the `streams:` remap.
pub trait Component: Send {
    fn config(&self) -> &ComponentConfig;

    fn name(&self) -> &str {
        &self.config().name
    }

    fn role(&self) -> Role;

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()>;

    fn input_definitions(&self) -> Definitions;

    fn output_definitions(&self) -> Definitions;

    /// Reads inputs and adds outputs. Must not touch any other stream.
    fn execute(&mut self, batch: &mut Batch, mode: Mode) -> Result<()>;

    fn is_differentiable(&self) -> bool {
        false
    }

    /// Propagates gradients from this component's outputs to its inputs and
    /// parameters. Only called on differentiable components, right after a
    /// train-mode `execute` on the same batch.
    fn backward(&mut self, _batch: &Batch, _grads: &mut GradTable) -> Result<()> {
        Ok(())
    }

    fn statistic_keys(&self) -> Vec<String> {
        Vec::new()
    }

    fn collect_statistics(&self, _batch: &Batch, _collector: &mut StatisticsCollector) -> Result<()> {
        Ok(())
    }

    fn parameters(&self) -> Option<&ParameterStore> {
        None
    }

    fn parameters_mut(&mut self) -> Option<&mut ParameterStore> {
        None
    }
}

/// A source of samples. Tasks seed the handshake table but are driven by
/// workers, not by [`Pipeline::forward`].
pub trait Task: Send + Sync {
    fn config(&self) -> &ComponentConfig;

    fn name(&self) -> &str {
        &self.config().name
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()>;

    /// Output definitions under default names.
    fn output_definitions(&self) -> Definitions;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Assembles the samples at `indices` under default stream names.
    fn sample(&self, indices: &[usize]) -> Result<Batch>;
}

/// Stable per-component seed: SHA-256 of the experiment seed and the component name.
pub fn derive_seed(experiment_seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(experiment_seed.to_le_bytes());
    h.update(name.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1337, "model"), derive_seed(1337, "model"));
        assert_ne!(derive_seed(1337, "model"), derive_seed(1337, "head"));
        assert_ne!(derive_seed(1337, "model"), derive_seed(1338, "model"));
    }
}
