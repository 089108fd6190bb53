use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{ComponentConfig, ConfigValue};
use crate::pipeline::{InitContext, Task};
use crate::stream::{Batch, Definitions, Dim, StreamDefinition, Value};
use crate::{Error, NDArray, Result};

/// In-memory classification data shared by the built-in tasks.
#[derive(Debug, Clone, Default)]
struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl Dataset {
    fn width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    fn batch(&self, indices: &[usize]) -> Result<(Batch, NDArray)> {
        let mut data = Vec::with_capacity(indices.len() * self.width());
        for &i in indices {
            let row = self
                .inputs
                .get(i)
                .ok_or_else(|| Error::invalid(format!("sample index {i} out of range ({})", self.inputs.len())))?;
            data.extend_from_slice(row);
        }
        let inputs = NDArray::from_vec(vec![indices.len(), self.width()], data)?;
        Ok((Batch::new(indices.to_vec())?, inputs))
    }
}

pub const BLOBS_DEFAULTS: &str = "
num_classes: 3
dim: 2
samples_per_class: 100
spread: 0.1
# 0 derives the data seed from the experiment seed and the task name
seed: 0
";

/// Gaussian clusters around class centers placed on a regular lattice.
pub struct GaussianBlobs {
    cfg: ComponentConfig,
    num_classes: usize,
    dim: usize,
    data: Dataset,
}

impl GaussianBlobs {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let num_classes = cfg.param_usize("num_classes")?;
        let dim = cfg.param_usize("dim")?;
        if num_classes < 2 || dim < 1 {
            return Err(Error::invalid(format!(
                "{}: need num_classes >= 2 and dim >= 1",
                cfg.name
            )));
        }
        Ok(Self {
            cfg,
            num_classes,
            dim,
            data: Dataset::default(),
        })
    }

    /// Center of `class`: its base-`m` digits (m = smallest side with
    /// `m^dim >= num_classes`) mapped to `2·digit − (m−1)` and scaled.
    pub fn center(class: usize, num_classes: usize, dim: usize, scale: f64) -> Vec<f64> {
        let mut side = 1usize;
        while side.checked_pow(dim as u32).is_some_and(|n| n < num_classes) {
            side += 1;
        }
        let mut rest = class;
        (0..dim)
            .map(|_| {
                let digit = rest % side;
                rest /= side;
                (2.0 * digit as f64 - (side as f64 - 1.0)) * scale
            })
            .collect()
    }
}

impl Task for GaussianBlobs {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        let per_class = self.cfg.param_usize("samples_per_class")?;
        let spread = self.cfg.param_f64("spread")?;
        if per_class == 0 || !(spread >= 0.0) {
            return Err(Error::invalid("samples_per_class must be >= 1 and spread >= 0"));
        }
        let seed = match self.cfg.param_i64("seed")? {
            0 => self.cfg.seed,
            s => s as u64,
        };
        let scale = if spread > 0.0 { 4.0 * spread } else { 1.0 };
        let noise = Normal::new(0.0, spread).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Dataset::default();
        for class in 0..self.num_classes {
            let center = Self::center(class, self.num_classes, self.dim, scale);
            for _ in 0..per_class {
                data.inputs
                    .push(center.iter().map(|c| c + noise.sample(&mut rng)).collect());
                data.targets.push(class);
            }
        }
        self.data = data;
        ctx.publish(&self.cfg, "num_classes", self.num_classes.into())?;
        ctx.publish(&self.cfg, "input_size", self.dim.into())?;
        Ok(())
    }

    fn output_definitions(&self) -> Definitions {
        Definitions::from([
            (
                "inputs".into(),
                StreamDefinition::array(&[Dim::Fixed(self.dim)], "sample coordinates"),
            ),
            (
                "targets".into(),
                StreamDefinition::indices(Some(self.num_classes), "class indices"),
            ),
        ])
    }

    fn len(&self) -> usize {
        self.data.inputs.len()
    }

    fn sample(&self, indices: &[usize]) -> Result<Batch> {
        let (mut batch, inputs) = self.data.batch(indices)?;
        batch.insert("inputs", Value::Array(inputs))?;
        batch.insert(
            "targets",
            Value::Indices(indices.iter().map(|&i| self.data.targets[i]).collect()),
        )?;
        Ok(batch)
    }
}

pub const PARITY_DEFAULTS: &str = "
num_bits: 2
";

/// Every bit vector of a fixed length labelled with its parity (XOR for two bits).
pub struct Parity {
    cfg: ComponentConfig,
    num_bits: usize,
    data: Dataset,
}

impl Parity {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let num_bits = cfg.param_usize("num_bits")?;
        if !(2..=16).contains(&num_bits) {
            return Err(Error::invalid(format!(
                "{}: num_bits must lie in 2..=16, got {num_bits}",
                cfg.name
            )));
        }
        Ok(Self {
            cfg,
            num_bits,
            data: Dataset::default(),
        })
    }
}

impl Task for Parity {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        let n = self.num_bits;
        let mut data = Dataset::default();
        for v in 0..(1usize << n) {
            // most significant bit first
            let bits: Vec<f64> = (0..n).rev().map(|b| ((v >> b) & 1) as f64).collect();
            data.targets.push(v.count_ones() as usize % 2);
            data.inputs.push(bits);
        }
        self.data = data;
        ctx.publish(&self.cfg, "num_classes", 2usize.into())?;
        ctx.publish(&self.cfg, "input_size", n.into())?;
        Ok(())
    }

    fn output_definitions(&self) -> Definitions {
        Definitions::from([
            (
                "inputs".into(),
                StreamDefinition::array(&[Dim::Fixed(self.num_bits)], "bit vectors"),
            ),
            ("targets".into(), StreamDefinition::indices(Some(2), "parity")),
        ])
    }

    fn len(&self) -> usize {
        self.data.inputs.len()
    }

    fn sample(&self, indices: &[usize]) -> Result<Batch> {
        let (mut batch, inputs) = self.data.batch(indices)?;
        batch.insert("inputs", Value::Array(inputs))?;
        batch.insert(
            "targets",
            Value::Indices(indices.iter().map(|&i| self.data.targets[i]).collect()),
        )?;
        Ok(batch)
    }
}

pub const CSV_DEFAULTS: &str = "
path: data.csv
# empty: every column except the label column
feature_columns: []
label_column: label
# from_data publishes the sorted distinct labels as global label_vocabulary; none publishes nothing
vocab_source: none
";

/// Numeric features and string labels read from a headed CSV file.
pub struct CsvClassification {
    cfg: ComponentConfig,
    features: usize,
    inputs: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl CsvClassification {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        match cfg.param_str("vocab_source")? {
            "none" | "from_data" => {}
            other => {
                return Err(Error::invalid(format!(
                    "{}: vocab_source must be 'none' or 'from_data', got '{other}'",
                    cfg.name
                )))
            }
        }
        Ok(Self {
            cfg,
            features: 0,
            inputs: Vec::new(),
            labels: Vec::new(),
        })
    }

    fn read(&mut self) -> Result<()> {
        let path = PathBuf::from(self.cfg.param_str("path")?);
        let label_column = self.cfg.param_str("label_column")?.to_string();
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::io(&path, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::io(&path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let column = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("{}: missing column '{name}'", path.display())))
        };
        let label_idx = column(&label_column)?;
        let mut feature_names = self.cfg.param_strings("feature_columns")?;
        if feature_names.is_empty() {
            feature_names = header.iter().filter(|h| **h != label_column).cloned().collect();
        }
        let feature_idx: Vec<usize> = feature_names.iter().map(|n| column(n)).collect::<Result<_>>()?;
        if feature_idx.is_empty() {
            return Err(Error::invalid(format!("{}: no feature columns", path.display())));
        }
        for record in reader.records() {
            let record = record.map_err(|e| Error::io(&path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            let mut row = Vec::with_capacity(feature_idx.len());
            for (&c, name) in feature_idx.iter().zip(&feature_names) {
                let cell = record.get(c).unwrap_or("").trim();
                let v: f64 = cell.parse().map_err(|_| {
                    Error::invalid(format!(
                        "{}: row {line}, column '{name}': '{cell}' is not a number",
                        path.display()
                    ))
                })?;
                row.push(v);
            }
            let label = record.get(label_idx).ok_or_else(|| {
                Error::invalid(format!("{}: row {line} has no '{label_column}' cell", path.display()))
            })?;
            self.inputs.push(row);
            self.labels.push(label.trim().to_string());
        }
        self.features = feature_idx.len();
        Ok(())
    }
}

impl Task for CsvClassification {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        self.read()?;
        ctx.publish(&self.cfg, "input_size", self.features.into())?;
        if self.cfg.param_str("vocab_source")? == "from_data" {
            let mut vocab: Vec<String> = self.labels.clone();
            vocab.sort();
            vocab.dedup();
            ctx.publish(
                &self.cfg,
                "label_vocabulary",
                ConfigValue::List(vocab.into_iter().map(ConfigValue::String).collect()),
            )?;
        }
        Ok(())
    }

    fn output_definitions(&self) -> Definitions {
        let width = if self.features > 0 {
            Dim::Fixed(self.features)
        } else {
            Dim::Any
        };
        Definitions::from([
            ("inputs".into(), StreamDefinition::array(&[width], "feature columns")),
            ("labels".into(), StreamDefinition::strings("label tokens")),
        ])
    }

    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn sample(&self, indices: &[usize]) -> Result<Batch> {
        let mut data = Vec::with_capacity(indices.len() * self.features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let row = self
                .inputs
                .get(i)
                .ok_or_else(|| Error::invalid(format!("sample index {i} out of range")))?;
            data.extend_from_slice(row);
            labels.push(self.labels[i].clone());
        }
        let mut batch = Batch::new(indices.to_vec())?;
        batch.insert(
            "inputs",
            Value::Array(NDArray::from_vec(vec![indices.len(), self.features], data)?),
        )?;
        batch.insert("labels", Value::Strings(labels))?;
        Ok(batch)
    }
}
