use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ComponentConfig, ConfigValue};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerKind {
    Sequential,
    /// A fresh permutation every epoch.
    Shuffled,
    /// Draws with replacement proportionally to per-sample weights.
    Weighted {
        weights: Vec<f64>,
        /// Draws per epoch; defaults to the dataset length.
        num_samples: Option<usize>,
    },
}

/// Produces the sample order for each epoch.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        Self {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Reads the `sampler:` entry of a task section (`{type, weights, num_samples}` or a bare type name).
    pub fn from_config(cfg: &ComponentConfig) -> Result<Self> {
        let bad = |m: &str| Error::invalid(format!("{}.sampler: {m}", cfg.name));
        let (type_name, map) = match cfg.params.get("sampler") {
            None => ("sequential".to_string(), None),
            Some(ConfigValue::String(s)) => (s.clone(), None),
            Some(ConfigValue::Map(m)) => (
                m.get("type")
                    .and_then(ConfigValue::as_str)
                    .unwrap_or("sequential")
                    .to_string(),
                Some(m),
            ),
            Some(_) => return Err(bad("expected a type name or a map")),
        };
        let kind = match type_name.as_str() {
            "sequential" => SamplerKind::Sequential,
            "shuffled" | "random" => SamplerKind::Shuffled,
            "weighted" => {
                let map = map.ok_or_else(|| bad("weighted sampling needs 'weights'"))?;
                let weights = map
                    .get("weights")
                    .and_then(ConfigValue::as_list)
                    .and_then(|l| l.iter().map(ConfigValue::as_f64).collect::<Option<Vec<_>>>())
                    .ok_or_else(|| bad("'weights' must be a list of numbers"))?;
                let num_samples = match map.get("num_samples") {
                    None => None,
                    Some(v) => Some(v.as_usize().ok_or_else(|| bad("'num_samples' must be an integer"))?),
                };
                SamplerKind::Weighted { weights, num_samples }
            }
            other => return Err(bad(&format!("unknown sampler '{other}'"))),
        };
        Ok(Self::new(kind, cfg.seed ^ 0x5a4d_504c_4552))
    }

    pub fn kind(&self) -> &SamplerKind {
        &self.kind
    }

    /// Sample indices for the next epoch over a dataset of `len` samples.
    pub fn epoch(&mut self, len: usize) -> Result<Vec<usize>> {
        match &self.kind {
            SamplerKind::Sequential => Ok((0..len).collect()),
            SamplerKind::Shuffled => {
                let mut order: Vec<usize> = (0..len).collect();
                order.shuffle(&mut self.rng);
                Ok(order)
            }
            SamplerKind::Weighted { weights, num_samples } => {
                if weights.len() != len {
                    return Err(Error::invalid(format!(
                        "sampler has {} weights for {len} samples",
                        weights.len()
                    )));
                }
                let dist =
                    WeightedIndex::new(weights).map_err(|e| Error::invalid(format!("invalid sampler weights: {e}")))?;
                let n = num_samples.unwrap_or(len);
                Ok((0..n).map(|_| dist.sample(&mut self.rng)).collect())
            }
        }
    }
}

/// Splits an epoch order into batches; the last one may be short.
pub fn chunk(order: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
