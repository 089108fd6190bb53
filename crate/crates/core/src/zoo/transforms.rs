use std::collections::HashMap;
use std::path::Path;

use crate::config::ComponentConfig;
use crate::pipeline::{Component, GradTable, InitContext, Mode, Role};
use crate::stream::{Batch, Definitions, Dim, StreamDefinition, Value};
use crate::{Error, NDArray, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnkPolicy {
    Error,
    UnkToken,
}

/// Bijection between known tokens and contiguous indices starting at 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the first occurrence of each token.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut v = Self::default();
        for t in tokens {
            v.push(t);
        }
        v
    }

    /// Whitespace-separated tokens of a text file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_tokens(text.split_whitespace().map(str::to_string)))
    }

    fn push(&mut self, token: String) -> usize {
        if let Some(&i) = self.index.get(&token) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(token.clone(), i);
        self.tokens.push(token);
        i
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub const LABEL_INDEXER_DEFAULTS: &str = "
# from_data reads the label_vocabulary global; anything else is a token file path
vocab_source: from_data
unk_policy: error
unk_token: <unk>
";

/// Maps string labels to class indices through a vocabulary fixed at initialization.
pub struct LabelIndexer {
    cfg: ComponentConfig,
    policy: UnkPolicy,
    vocab: Vocabulary,
    unk: Option<usize>,
}

impl LabelIndexer {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let policy = match cfg.param_str("unk_policy")? {
            "error" => UnkPolicy::Error,
            "unk_token" => UnkPolicy::UnkToken,
            other => {
                return Err(Error::invalid(format!(
                    "{}: unk_policy must be 'error' or 'unk_token', got '{other}'",
                    cfg.name
                )))
            }
        };
        Ok(Self {
            cfg,
            policy,
            vocab: Vocabulary::default(),
            unk: None,
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl Component for LabelIndexer {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Transform
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        let source = self.cfg.param_str("vocab_source")?;
        let mut vocab = if source == "from_data" {
            let v = ctx.global(&self.cfg, "label_vocabulary")?;
            let tokens = v
                .as_string_list()
                .ok_or_else(|| Error::invalid(format!("global label_vocabulary is not a token list: {v}")))?;
            Vocabulary::from_tokens(tokens)
        } else {
            Vocabulary::from_file(Path::new(source))?
        };
        if vocab.is_empty() {
            return Err(Error::invalid(format!("{}: vocabulary is empty", self.cfg.name)));
        }
        self.unk = match self.policy {
            UnkPolicy::Error => None,
            UnkPolicy::UnkToken => Some(vocab.push(self.cfg.param_str("unk_token")?.to_string())),
        };
        self.vocab = vocab;
        ctx.publish(&self.cfg, "num_classes", self.vocab.len().into())?;
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        Definitions::from([("labels".into(), StreamDefinition::strings("label tokens"))])
    }

    fn output_definitions(&self) -> Definitions {
        let classes = (!self.vocab.is_empty()).then_some(self.vocab.len());
        Definitions::from([("targets".into(), StreamDefinition::indices(classes, "label indices"))])
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let labels = batch.strings(self.cfg.stream("labels"))?;
        let targets = labels
            .iter()
            .zip(batch.sample_indices())
            .map(|(token, &sample)| {
                self.vocab
                    .index_of(token)
                    .or(self.unk)
                    .ok_or_else(|| Error::invalid(format!("unknown label '{token}' in sample {sample}")))
            })
            .collect::<Result<Vec<_>>>()?;
        batch.insert(self.cfg.stream("targets"), Value::Indices(targets))?;
        Ok(())
    }
}

pub const ONE_HOT_DEFAULTS: &str = "{}";

/// Index list to rows holding a single 1.0 at the index.
pub struct OneHot {
    cfg: ComponentConfig,
    classes: Option<usize>,
}

impl OneHot {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        Ok(Self { cfg, classes: None })
    }

    pub fn encode(indices: &[usize], classes: usize) -> Result<NDArray> {
        let mut data = vec![0.0; indices.len() * classes];
        for (row, &i) in indices.iter().enumerate() {
            if i >= classes {
                return Err(Error::invalid(format!("index {i} out of range for {classes} classes")));
            }
            data[row * classes + i] = 1.0;
        }
        Ok(NDArray::from_vec(vec![indices.len(), classes], data)?)
    }
}

impl Component for OneHot {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Transform
    }

    fn initialize(&mut self, ctx: &mut InitContext<'_>) -> Result<()> {
        self.classes = Some(ctx.global_usize(&self.cfg, "num_classes")?);
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        Definitions::from([(
            "indices".into(),
            StreamDefinition::indices(self.classes, "class indices"),
        )])
    }

    fn output_definitions(&self) -> Definitions {
        let width = self.classes.map_or(Dim::Any, Dim::Fixed);
        Definitions::from([("one_hot".into(), StreamDefinition::array(&[width], "one-hot rows"))])
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let classes = self
            .classes
            .ok_or_else(|| Error::invalid("num_classes is unresolved"))?;
        let encoded = Self::encode(batch.indices(self.cfg.stream("indices"))?, classes)?;
        batch.insert(self.cfg.stream("one_hot"), Value::Array(encoded))?;
        Ok(())
    }
}

pub const CONCAT_DEFAULTS: &str = "
input_streams: []
output_stream: concatenated
# optional per-input widths; empty leaves widths unchecked at handshake
input_sizes: []
";

/// Joins rank-2 inputs along the feature dimension.
pub struct Concat {
    cfg: ComponentConfig,
    inputs: Vec<String>,
    output: String,
    sizes: Vec<usize>,
    /// Widths seen in the last forward pass.
    widths: Vec<usize>,
}

impl Concat {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        let inputs = cfg.param_strings("input_streams")?;
        if inputs.is_empty() {
            return Err(Error::invalid(format!("{}: input_streams is empty", cfg.name)));
        }
        let sizes = cfg.param_usizes("input_sizes")?;
        if !sizes.is_empty() && sizes.len() != inputs.len() {
            return Err(Error::invalid(format!(
                "{}: {} input_sizes for {} input_streams",
                cfg.name,
                sizes.len(),
                inputs.len()
            )));
        }
        let output = cfg.param_str("output_stream")?.to_string();
        Ok(Self {
            cfg,
            inputs,
            output,
            sizes,
            widths: Vec::new(),
        })
    }

    pub fn concat(parts: &[&NDArray]) -> Result<NDArray> {
        let rows = parts.first().map_or(0, |p| p.rows());
        for p in parts {
            p.require_rank(2)?;
            if p.rows() != rows {
                return Err(Error::invalid(format!("batch mismatch: {} rows vs {rows}", p.rows())));
            }
        }
        let width: usize = parts.iter().map(|p| p.row_len()).sum();
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(i));
            }
        }
        Ok(NDArray::from_vec(vec![rows, width], data)?)
    }

    /// Splits `g` column-wise at the given widths.
    pub fn split(g: &NDArray, widths: &[usize]) -> Result<Vec<NDArray>> {
        let rows = g.rows();
        let mut offset = 0;
        widths
            .iter()
            .map(|&w| {
                let mut data = Vec::with_capacity(rows * w);
                for i in 0..rows {
                    data.extend_from_slice(&g.row(i)[offset..offset + w]);
                }
                offset += w;
                Ok(NDArray::from_vec(vec![rows, w], data)?)
            })
            .collect()
    }
}

impl Component for Concat {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Transform
    }

    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        self.inputs
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let width = self.sizes.get(i).map_or(Dim::Any, |&w| Dim::Fixed(w));
                (name.clone(), StreamDefinition::array(&[width], "concatenation input"))
            })
            .collect()
    }

    fn output_definitions(&self) -> Definitions {
        let width = if self.sizes.is_empty() {
            Dim::Any
        } else {
            Dim::Fixed(self.sizes.iter().sum())
        };
        Definitions::from([(
            self.output.clone(),
            StreamDefinition::array(&[width], "concatenated features"),
        )])
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let parts = self
            .inputs
            .iter()
            .map(|n| batch.array(self.cfg.stream(n)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let joined = Self::concat(&parts)?;
        self.widths = parts.iter().map(|p| p.row_len()).collect();
        batch.insert(self.cfg.stream(&self.output), Value::Array(joined))?;
        Ok(())
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn backward(&mut self, _batch: &Batch, grads: &mut GradTable) -> Result<()> {
        let Some(g) = grads.get(self.cfg.stream(&self.output)).cloned() else {
            return Ok(());
        };
        for (name, part) in self.inputs.iter().zip(Self::split(&g, &self.widths)?) {
            grads.accumulate(self.cfg.stream(name), part)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve_component_config, ConfigTree, ConfigValue, GlobalParams};

    fn cfg(defaults: &str, section: &str) -> ComponentConfig {
        let d = ConfigTree::from_yaml_str(defaults, "").unwrap();
        resolve_component_config(&d, &ConfigTree::from_yaml_str(section, "").unwrap(), "t").unwrap()
    }

    fn ctx(g: &mut GlobalParams) -> InitContext<'_> {
        InitContext {
            globals: g,
            output_dir: None,
        }
    }

    fn label_batch(labels: &[&str]) -> Batch {
        let mut b = Batch::new((0..labels.len()).collect()).unwrap();
        b.insert("labels", Value::Strings(labels.iter().map(|s| s.to_string()).collect()))
            .unwrap();
        b
    }

    fn indexer(section: &str) -> (LabelIndexer, GlobalParams) {
        let mut g = GlobalParams::new();
        g.publish(
            "label_vocabulary",
            ConfigValue::List(vec!["no".into(), "yes".into()]),
            "task",
        )
        .unwrap();
        let mut t = LabelIndexer::new(cfg(LABEL_INDEXER_DEFAULTS, section)).unwrap();
        t.initialize(&mut ctx(&mut g)).unwrap();
        (t, g)
    }

    #[test]
    fn indexes_labels() {
        let (mut t, g) = indexer("{type: li}");
        assert_eq!(g.get("num_classes").unwrap().as_usize(), Some(2));
        let mut b = label_batch(&["yes", "no"]);
        t.execute(&mut b, Mode::Train).unwrap();
        assert_eq!(b.indices("targets").unwrap(), &[1, 0]);
    }

    #[test]
    fn unknown_label_is_named() {
        let (mut t, _) = indexer("{type: li}");
        let err = t.execute(&mut label_batch(&["yes", "maybe"]), Mode::Train).unwrap_err();
        assert!(err.to_string().contains("'maybe'"), "{err}");
        assert!(err.to_string().contains("sample 1"), "{err}");
    }

    #[test]
    fn unk_token_policy() {
        let (mut t, g) = indexer("{type: li, unk_policy: unk_token}");
        assert_eq!(g.get("num_classes").unwrap().as_usize(), Some(3));
        let mut b = label_batch(&["maybe", "no"]);
        t.execute(&mut b, Mode::Train).unwrap();
        assert_eq!(b.indices("targets").unwrap(), &[2, 0]);
    }

    #[test]
    fn vocabulary_is_fixed_after_init() {
        let (mut t, _) = indexer("{type: li}");
        let before = t.vocabulary().clone();
        let mut b = label_batch(&["no", "yes", "no"]);
        t.execute(&mut b, Mode::Eval).unwrap();
        assert_eq!(t.vocabulary(), &before);
        assert_eq!(b.indices("targets").unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn vocabulary_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        std::fs::write(&path, "cat dog\nbird  cat\n").unwrap();
        let v = Vocabulary::from_file(&path).unwrap();
        assert_eq!(v.tokens(), ["cat", "dog", "bird"]);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
            assert_eq!(v.token(i), Some(t.as_str()));
        }
    }

    #[test]
    fn one_hot_rows() {
        assert_eq!(OneHot::encode(&[2], 4).unwrap().data(), &[0., 0., 1., 0.]);
        let e = OneHot::encode(&[0, 3, 1, 1], 4).unwrap();
        assert!((0..4).all(|i| e.row(i).iter().sum::<f64>() == 1.0));
        assert_eq!(e.argmax_rows(), vec![0, 3, 1, 1]);
        assert!(OneHot::encode(&[4], 4).is_err());
    }

    #[test]
    fn one_hot_reads_global() {
        let mut g = GlobalParams::new();
        g.publish("num_classes", 3usize.into(), "task").unwrap();
        let mut t = OneHot::new(cfg(ONE_HOT_DEFAULTS, "{type: oh}")).unwrap();
        t.initialize(&mut ctx(&mut g)).unwrap();
        let mut b = Batch::new(vec![0, 1]).unwrap();
        b.insert("indices", Value::Indices(vec![2, 0])).unwrap();
        t.execute(&mut b, Mode::Eval).unwrap();
        assert_eq!(b.array("one_hot").unwrap().shape(), &[2, 3]);
    }

    #[test]
    fn concat_and_split() {
        let a = NDArray::full(vec![2, 2], 1.0).unwrap();
        let b = NDArray::full(vec![2, 3], 2.0).unwrap();
        let j = Concat::concat(&[&a, &b]).unwrap();
        assert_eq!(j.shape(), &[2, 5]);
        assert_eq!(j.row(0), &[1., 1., 2., 2., 2.]);
        assert_eq!(Concat::concat(&[&a]).unwrap(), a);
        let parts = Concat::split(&NDArray::full(vec![2, 5], 1.0).unwrap(), &[2, 3]).unwrap();
        assert_eq!(parts[0], NDArray::full(vec![2, 2], 1.0).unwrap());
        assert_eq!(parts[1], NDArray::full(vec![2, 3], 1.0).unwrap());
        assert!(Concat::concat(&[&a, &NDArray::zeros(vec![3, 1]).unwrap()]).is_err());
    }

    #[test]
    fn concat_backward_splits_by_width() {
        let mut t = Concat::new(cfg(CONCAT_DEFAULTS, "{type: c, input_streams: [a, b]}")).unwrap();
        let mut batch = Batch::new(vec![0, 1]).unwrap();
        batch
            .insert("a", Value::Array(NDArray::zeros(vec![2, 2]).unwrap()))
            .unwrap();
        batch
            .insert("b", Value::Array(NDArray::zeros(vec![2, 3]).unwrap()))
            .unwrap();
        t.execute(&mut batch, Mode::Train).unwrap();
        let mut grads = GradTable::new();
        grads
            .accumulate("concatenated", NDArray::full(vec![2, 5], 1.0).unwrap())
            .unwrap();
        t.backward(&batch, &mut grads).unwrap();
        assert_eq!(grads.get("a").unwrap().shape(), &[2, 2]);
        assert_eq!(grads.get("b").unwrap().sum(), 6.0);
    }
}
