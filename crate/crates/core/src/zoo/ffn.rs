use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::config::ComponentConfig;
use crate::numeric::{activation, activation_backward, dropout, dropout_backward, matmul, matmul_backward, Activation};
use crate::pipeline::{Component, GradTable, InitContext, Mode, Role};
use crate::stream::{Batch, Definitions, Dim, StreamDefinition, Value};
use crate::{Error, NDArray, ParameterStore, Result};

pub const DEFAULTS: &str = "
# 0 resolves from the input_size global
input_size: 0
# 0 resolves from the num_classes global
prediction_size: 0
hidden_sizes: []
activation: relu
final_activation: log_softmax
dropout: 0.0
";

/// Values kept from the last train-mode forward pass for the reverse sweep.
#[derive(Default)]
struct Cache {
    /// Input of each affine layer.
    inputs: Vec<NDArray>,
    pre: Vec<NDArray>,
    post: Vec<NDArray>,
    /// Dropout mask applied after each hidden layer.
    masks: Vec<Option<NDArray>>,
}

/// Stack of fully connected layers with an activation (and dropout) between them.
pub struct FeedForward {
    cfg: ComponentConfig,
    hidden: Vec<usize>,
    hidden_activation: Activation,
    final_activation: Activation,
    dropout: f64,
    sizes: Vec<usize>,
    params: ParameterStore,
    rng: ChaCha8Rng,
    cache: Option<Cache>,
}

impl FeedForward {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let hidden = cfg.param_usizes("hidden_sizes")?;
        if hidden.contains(&0) {
            return Err(Error::invalid(format!("{}: hidden sizes must be positive", cfg.name)));
        }
        let hidden_activation: Activation = cfg.param_str("activation")?.parse()?;
        let final_activation: Activation = cfg.param_str("final_activation")?.parse()?;
        if hidden_activation == Activation::LogSoftmax {
            return Err(Error::invalid(format!(
                "{}: log_softmax is only valid as final_activation",
                cfg.name
            )));
        }
        let dropout = cfg.param_f64("dropout")?;
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("{}: dropout must lie in [0, 1)", cfg.name)));
        }
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        Ok(Self {
            cfg,
            hidden,
            hidden_activation,
            final_activation,
            dropout,
            sizes: Vec::new(),
            params: ParameterStore::new(),
            rng,
            cache: None,
        })
    }

    fn layers(&self) -> usize {
        self.sizes.len().saturating_sub(1)
    }

    fn resolve(&self, ctx: &InitContext<'_>, key: &str, global: &str) -> Result<usize> {
        match self.cfg.param_usize(key)? {
            0 => ctx
                .global_usize(&self.cfg, global)
                .map_err(|e| Error::invalid(format!("{key} is unset and cannot be resolved from globals: {e}"))),
            n => Ok(n),
        }
    }

    fn input_size(&self) -> Option<usize> {
        self.sizes.first().copied()
    }

    fn prediction_size(&self) -> Option<usize> {
        self.sizes.last().copied()
    }
}

impl Component for FeedForward {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Model
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        let input = self.resolve(ctx, "input_size", "input_size")?;
        let output = self.resolve(ctx, "prediction_size", "num_classes")?;
        let mut sizes = vec![input];
        sizes.extend(&self.hidden);
        sizes.push(output);
        let mut init_rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut params = ParameterStore::new();
        for (i, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let mut draw = |n: usize| (0..n).map(|_| dist.sample(&mut init_rng)).collect::<Vec<_>>();
            params.insert(
                format!("fc{i}.weight"),
                NDArray::from_vec(vec![fan_in, fan_out], draw(fan_in * fan_out))?,
            );
            params.insert(format!("fc{i}.bias"), NDArray::from_vec(vec![fan_out], draw(fan_out))?);
        }
        self.sizes = sizes;
        self.params = params;
        self.cache = None;
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        let width = self.input_size().map_or(Dim::Any, Dim::Fixed);
        Definitions::from([("inputs".into(), StreamDefinition::array(&[width], "features"))])
    }

    fn output_definitions(&self) -> Definitions {
        let width = self.prediction_size().map_or(Dim::Any, Dim::Fixed);
        let desc = if self.final_activation == Activation::LogSoftmax {
            "log-probabilities"
        } else {
            "predictions"
        };
        Definitions::from([("predictions".into(), StreamDefinition::array(&[width], desc))])
    }

    fn execute(&mut self, batch: &mut Batch, mode: Mode) -> Result<()> {
        let mut x = batch.array(self.cfg.stream("inputs"))?.clone();
        x.require_rank(2)?;
        let last = self
            .layers()
            .checked_sub(1)
            .ok_or_else(|| Error::invalid("model is not initialized"))?;
        let mut cache = Cache::default();
        for i in 0..=last {
            let w = self.params.value(&format!("fc{i}.weight"))?;
            let b = self.params.value(&format!("fc{i}.bias"))?;
            let z = matmul(&x, w)?.add_row_vector(b)?;
            let kind = if i == last {
                self.final_activation
            } else {
                self.hidden_activation
            };
            let a = activation(&z, kind)?;
            let (out, mask) = if i == last {
                (a.clone(), None)
            } else {
                dropout(&a, self.dropout, mode.dropout(), &mut self.rng)?
            };
            cache.inputs.push(std::mem::replace(&mut x, out));
            cache.pre.push(z);
            cache.post.push(a);
            cache.masks.push(mask);
        }
        self.cache = (mode == Mode::Train).then_some(cache);
        batch.insert(self.cfg.stream("predictions"), Value::Array(x))?;
        Ok(())
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn backward(&mut self, _batch: &Batch, grads: &mut GradTable) -> Result<()> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::invalid("backward requires a preceding train-mode forward pass"))?;
        let Some(mut g) = grads.get(self.cfg.stream("predictions")).cloned() else {
            return Ok(());
        };
        let last = self.layers() - 1;
        for i in (0..=last).rev() {
            if i != last {
                g = dropout_backward(cache.masks[i].as_ref(), &g)?;
            }
            let kind = if i == last {
                self.final_activation
            } else {
                self.hidden_activation
            };
            let gz = activation_backward(kind, &cache.pre[i], &cache.post[i], &g)?;
            let w = self.params.value(&format!("fc{i}.weight"))?;
            let (gx, gw) = matmul_backward(&cache.inputs[i], w, &gz)?;
            self.params.accumulate_grad(&format!("fc{i}.weight"), &gw)?;
            self.params.accumulate_grad(&format!("fc{i}.bias"), &gz.sum_rows()?)?;
            g = gx;
        }
        grads.accumulate(self.cfg.stream("inputs"), g)?;
        Ok(())
    }

    fn parameters(&self) -> Option<&ParameterStore> {
        Some(&self.params)
    }

    fn parameters_mut(&mut self) -> Option<&mut ParameterStore> {
        Some(&mut self.params)
    }
}
