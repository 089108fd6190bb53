//! Values exchanged between components, batches, and the stream definitions
//! checked during handshaking.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::NDArray;

/// Payload of one stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Array(NDArray),
    Indices(Vec<usize>),
    Strings(Vec<String>),
    Scalar(f64),
}

impl Value {
    pub fn kind(&self) -> StreamKind {
        match self {
            Self::Array(_) => StreamKind::NumericArray,
            Self::Indices(_) => StreamKind::IndexList,
            Self::Strings(_) => StreamKind::StringList,
            Self::Scalar(_) => StreamKind::Scalar,
        }
    }

    /// Leading dimension: rows of an array, length of a list, `None` for scalars.
    fn leading_len(&self) -> Option<usize> {
        match self {
            Self::Array(a) => Some(a.rows()),
            Self::Indices(v) => Some(v.len()),
            Self::Strings(v) => Some(v.len()),
            Self::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    NumericArray,
    IndexList,
    StringList,
    Scalar,
    /// Wildcard for requirements that only need the stream to exist.
    Any,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NumericArray => "numeric_array",
            Self::IndexList => "index_list",
            Self::StringList => "string_list",
            Self::Scalar => "scalar",
            Self::Any => "any",
        })
    }
}

/// One dimension of a shape pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Binds to the batch size.
    Batch,
    /// Matches any extent.
    Any,
    Fixed(usize),
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Batch => f.write_str("BATCH"),
            Self::Any => f.write_str("ANY"),
            Self::Fixed(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDefinition {
    pub kind: StreamKind,
    /// Only meaningful for numeric arrays; the first entry is always [`Dim::Batch`].
    pub shape: Vec<Dim>,
    /// Exclusive upper bound on index-list entries, when known.
    pub classes: Option<usize>,
    pub description: String,
}

/// Definitions keyed by stream name.
pub type Definitions = BTreeMap<String, StreamDefinition>;

impl StreamDefinition {
    /// Numeric array whose pattern is `[BATCH, trailing...]`.
    pub fn array(trailing: &[Dim], description: &str) -> Self {
        let mut shape = vec![Dim::Batch];
        shape.extend_from_slice(trailing);
        Self {
            kind: StreamKind::NumericArray,
            shape,
            classes: None,
            description: description.to_string(),
        }
    }

    pub fn indices(classes: Option<usize>, description: &str) -> Self {
        Self {
            kind: StreamKind::IndexList,
            shape: Vec::new(),
            classes,
            description: description.to_string(),
        }
    }

    pub fn strings(description: &str) -> Self {
        Self {
            kind: StreamKind::StringList,
            shape: Vec::new(),
            classes: None,
            description: description.to_string(),
        }
    }

    pub fn scalar(description: &str) -> Self {
        Self {
            kind: StreamKind::Scalar,
            shape: Vec::new(),
            classes: None,
            description: description.to_string(),
        }
    }

    /// Requirement satisfied by a stream of any kind.
    pub fn any(description: &str) -> Self {
        Self {
            kind: StreamKind::Any,
            shape: Vec::new(),
            classes: None,
            description: description.to_string(),
        }
    }

    /// Whether this can describe a produced stream.
    pub fn is_valid(&self) -> bool {
        match self.kind {
            StreamKind::Any => false,
            StreamKind::NumericArray => {
                self.shape.first() == Some(&Dim::Batch) && self.shape.iter().all(|d| *d != Dim::Fixed(0))
            }
            _ => self.shape.is_empty(),
        }
    }
}

impl fmt::Display for StreamDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if self.kind == StreamKind::NumericArray {
            let dims: Vec<String> = self.shape.iter().map(Dim::to_string).collect();
            write!(f, "[{}]", dims.join(", "))?;
        }
        if let Some(c) = self.classes {
            write!(f, "(<{c})")?;
        }
        Ok(())
    }
}

/// Whether a stream produced as `produced` may feed an input declared as `required`.
///
/// Kinds must match. Numeric patterns need equal rank, and each required dim
/// must be `ANY`, `BATCH` against `BATCH`, or an integer equal to the produced
/// one. A required class bound on an index list needs a produced bound no larger.
pub fn definition_satisfies(produced: &StreamDefinition, required: &StreamDefinition) -> bool {
    if required.kind == StreamKind::Any {
        return true;
    }
    if produced.kind != required.kind {
        return false;
    }
    match produced.kind {
        StreamKind::NumericArray => {
            produced.shape.len() == required.shape.len()
                && produced.shape.iter().zip(&required.shape).all(|(p, r)| match r {
                    Dim::Any => true,
                    Dim::Batch => *p == Dim::Batch,
                    Dim::Fixed(n) => *p == Dim::Fixed(*n),
                })
        }
        StreamKind::IndexList => match (produced.classes, required.classes) {
            (_, None) => true,
            (Some(p), Some(r)) => p <= r,
            (None, Some(_)) => false,
        },
        StreamKind::StringList | StreamKind::Scalar | StreamKind::Any => true,
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("stream '{0}' not found in batch")]
    Missing(String),
    #[error("stream '{0}' already exists in batch")]
    Collision(String),
    #[error("stream '{name}' is {found}, expected {expected}")]
    WrongKind {
        name: String,
        expected: StreamKind,
        found: StreamKind,
    },
    #[error("stream '{name}' has leading size {found}, batch size is {expected}")]
    SizeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("a batch needs at least one sample")]
    EmptyBatch,
}

/// Named streams for one batch of samples. Streams can be added but never
/// replaced or removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    streams: IndexMap<String, Value>,
    batch_size: usize,
    sample_indices: Vec<usize>,
}

impl Batch {
    pub fn new(sample_indices: Vec<usize>) -> Result<Self, StreamError> {
        if sample_indices.is_empty() {
            return Err(StreamError::EmptyBatch);
        }
        Ok(Self {
            streams: IndexMap::new(),
            batch_size: sample_indices.len(),
            sample_indices,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn sample_indices(&self) -> &[usize] {
        &self.sample_indices
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Value) -> Result<(), StreamError> {
        let name = name.into();
        if self.streams.contains_key(&name) {
            return Err(StreamError::Collision(name));
        }
        if let Some(found) = value.leading_len() {
            if found != self.batch_size {
                return Err(StreamError::SizeMismatch {
                    name,
                    expected: self.batch_size,
                    found,
                });
            }
        }
        self.streams.insert(name, value);
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.streams.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Value, StreamError> {
        self.streams
            .get(name)
            .ok_or_else(|| StreamError::Missing(name.to_string()))
    }

    fn wrong_kind(name: &str, expected: StreamKind, v: &Value) -> StreamError {
        StreamError::WrongKind {
            name: name.to_string(),
            expected,
            found: v.kind(),
        }
    }

    pub fn array(&self, name: &str) -> Result<&NDArray, StreamError> {
        match self.get(name)? {
            Value::Array(a) => Ok(a),
            v => Err(Self::wrong_kind(name, StreamKind::NumericArray, v)),
        }
    }

    pub fn indices(&self, name: &str) -> Result<&[usize], StreamError> {
        match self.get(name)? {
            Value::Indices(v) => Ok(v),
            v => Err(Self::wrong_kind(name, StreamKind::IndexList, v)),
        }
    }

    pub fn strings(&self, name: &str) -> Result<&[String], StreamError> {
        match self.get(name)? {
            Value::Strings(v) => Ok(v),
            v => Err(Self::wrong_kind(name, StreamKind::StringList, v)),
        }
    }

    pub fn scalar(&self, name: &str) -> Result<f64, StreamError> {
        match self.get(name)? {
            Value::Scalar(x) => Ok(*x),
            v => Err(Self::wrong_kind(name, StreamKind::Scalar, v)),
        }
    }

    /// Stream names in insertion order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.streams.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Copy with streams renamed through `remap` (names absent from it are kept).
    pub fn renamed(self, remap: &BTreeMap<String, String>) -> Result<Self, StreamError> {
        let mut out = Self {
            streams: IndexMap::new(),
            batch_size: self.batch_size,
            sample_indices: self.sample_indices,
        };
        for (name, value) in self.streams {
            let target = remap.get(&name).cloned().unwrap_or(name);
            out.insert(target, value)?;
        }
        Ok(out)
    }
}

/// A run-time mismatch between a batch and a stream definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub stream: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stream, self.message)
    }
}

/// Checks every defined stream against the batch. `BATCH` binds to the batch
/// size; `ANY` binds independently per stream. Never stops at the first problem.
pub fn validate_batch(batch: &Batch, definitions: &Definitions) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, def) in definitions {
        let mut push = |message: String| {
            out.push(Violation {
                stream: name.clone(),
                message,
            })
        };
        let Ok(value) = batch.get(name) else {
            push("missing from batch".into());
            continue;
        };
        if def.kind == StreamKind::Any {
            continue;
        }
        if value.kind() != def.kind {
            push(format!("is {}, defined as {}", value.kind(), def.kind));
            continue;
        }
        match value {
            Value::Array(a) => {
                let conforms = a.rank() == def.shape.len()
                    && a.shape().iter().zip(&def.shape).all(|(&n, d)| match d {
                        Dim::Batch => n == batch.batch_size,
                        Dim::Any => true,
                        Dim::Fixed(m) => n == *m,
                    });
                if !conforms {
                    push(format!("shape {:?} does not conform to {def}", a.shape()));
                }
            }
            Value::Indices(v) => {
                if v.len() != batch.batch_size {
                    push(format!(
                        "length mismatch: {} vs batch size {}",
                        v.len(),
                        batch.batch_size
                    ));
                }
                if let Some(bound) = def.classes {
                    if let Some(bad) = v.iter().find(|&&i| i >= bound) {
                        push(format!("index {bad} is not below class count {bound}"));
                    }
                }
            }
            Value::Strings(v) => {
                if v.len() != batch.batch_size {
                    push(format!(
                        "length mismatch: {} vs batch size {}",
                        v.len(),
                        batch.batch_size
                    ));
                }
            }
            Value::Scalar(_) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arr(rows: usize, cols: usize) -> Value {
        Value::Array(NDArray::zeros(vec![rows, cols]).unwrap())
    }

    #[test]
    fn wildcard_absorbs_integer() {
        let p = StreamDefinition::array(&[Dim::Fixed(10)], "");
        let r = StreamDefinition::array(&[Dim::Any], "");
        assert!(definition_satisfies(&p, &r));
    }

    #[test]
    fn integer_mismatch() {
        let p = StreamDefinition::array(&[Dim::Fixed(10)], "");
        let r = StreamDefinition::array(&[Dim::Fixed(12)], "");
        assert!(!definition_satisfies(&p, &r));
    }

    #[test]
    fn kind_mismatch() {
        let p = StreamDefinition::indices(None, "");
        let r = StreamDefinition::array(&[Dim::Any], "");
        assert!(!definition_satisfies(&p, &r));
    }

    #[test]
    fn produced_any_only_satisfies_any() {
        let p = StreamDefinition::array(&[Dim::Any], "");
        assert!(!definition_satisfies(
            &p,
            &StreamDefinition::array(&[Dim::Fixed(3)], "")
        ));
        assert!(definition_satisfies(&p, &StreamDefinition::array(&[Dim::Any], "")));
    }

    #[test]
    fn any_kind_requirement() {
        let r = StreamDefinition::any("");
        assert!(definition_satisfies(&StreamDefinition::strings(""), &r));
        assert!(definition_satisfies(&StreamDefinition::array(&[Dim::Fixed(2)], ""), &r));
    }

    #[test]
    fn class_bounds() {
        let r = StreamDefinition::indices(Some(4), "");
        assert!(definition_satisfies(&StreamDefinition::indices(Some(3), ""), &r));
        assert!(!definition_satisfies(&StreamDefinition::indices(Some(5), ""), &r));
        assert!(!definition_satisfies(&StreamDefinition::indices(None, ""), &r));
        assert!(definition_satisfies(
            &StreamDefinition::indices(None, ""),
            &StreamDefinition::indices(None, "")
        ));
    }

    #[test]
    fn conforming_batch_has_no_violations() {
        let mut b = Batch::new((0..4).collect()).unwrap();
        b.insert("x", arr(4, 10)).unwrap();
        let mut defs = Definitions::new();
        defs.insert("x".into(), StreamDefinition::array(&[Dim::Fixed(10)], ""));
        assert!(validate_batch(&b, &defs).is_empty());
    }

    #[test]
    fn width_violation_names_stream() {
        let mut b = Batch::new((0..4).collect()).unwrap();
        b.insert("x", arr(4, 10)).unwrap();
        let mut defs = Definitions::new();
        defs.insert("x".into(), StreamDefinition::array(&[Dim::Fixed(12)], ""));
        let v = validate_batch(&b, &defs);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].stream, "x");
    }

    #[test]
    fn index_list_length_violation() {
        let mut b = Batch::new((0..4).collect()).unwrap();
        // bypass the insert-time size check to model a misbehaving producer
        b.streams.insert("y".into(), Value::Indices(vec![0, 1, 2]));
        let mut defs = Definitions::new();
        defs.insert("y".into(), StreamDefinition::indices(None, ""));
        let v = validate_batch(&b, &defs);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("length mismatch"));
    }

    #[test]
    fn insert_enforces_batch_invariants() {
        let mut b = Batch::new(vec![0, 1]).unwrap();
        b.insert("x", arr(2, 3)).unwrap();
        assert_eq!(b.insert("x", arr(2, 3)), Err(StreamError::Collision("x".into())));
        assert!(matches!(
            b.insert("z", arr(3, 3)),
            Err(StreamError::SizeMismatch { .. })
        ));
        b.insert("loss", Value::Scalar(1.0)).unwrap();
        assert!(Batch::new(vec![]).is_err());
    }

    #[test]
    fn renamed_moves_streams() {
        let mut b = Batch::new(vec![0]).unwrap();
        b.insert("a", Value::Scalar(1.0)).unwrap();
        b.insert("b", Value::Scalar(2.0)).unwrap();
        let remap = BTreeMap::from([("a".to_string(), "x".to_string())]);
        let r = b.renamed(&remap).unwrap();
        assert_eq!(r.scalar("x").unwrap(), 1.0);
        assert_eq!(r.scalar("b").unwrap(), 2.0);
        assert!(!r.contains("a"));
    }

    fn dim() -> impl Strategy<Value = Dim> {
        prop_oneof![Just(Dim::Any), (1usize..5).prop_map(Dim::Fixed)]
    }

    fn array_def() -> impl Strategy<Value = StreamDefinition> {
        prop::collection::vec(dim(), 0..3).prop_map(|d| StreamDefinition::array(&d, ""))
    }

    proptest! {
        #[test]
        fn satisfies_is_reflexive(def in array_def()) {
            prop_assert!(definition_satisfies(&def, &def));
        }

        // A batch conforming to the produced definition also conforms to any
        // definition it satisfies.
        #[test]
        fn handshake_is_sound(
            produced in array_def(),
            relax in prop::collection::vec(any::<bool>(), 3),
            batch_size in 1usize..4,
            any_extents in prop::collection::vec(1usize..5, 3),
        ) {
            // a requirement that loosens some produced dims to ANY
            let trailing: Vec<Dim> = produced.shape[1..]
                .iter()
                .zip(&relax)
                .map(|(d, &r)| if r { Dim::Any } else { *d })
                .collect();
            let required = StreamDefinition::array(&trailing, "");
            prop_assert!(definition_satisfies(&produced, &required));
            let mut shape = vec![batch_size];
            for (i, d) in produced.shape[1..].iter().enumerate() {
                shape.push(match d {
                    Dim::Fixed(n) => *n,
                    _ => any_extents[i],
                });
            }
            let n = shape.iter().product();
            let mut b = Batch::new((0..batch_size).collect()).unwrap();
            b.insert("s", Value::Array(NDArray::from_vec(shape, vec![0.0; n]).unwrap())).unwrap();
            let defs = |d: &StreamDefinition| Definitions::from([("s".to_string(), d.clone())]);
            prop_assert!(validate_batch(&b, &defs(&produced)).is_empty());
            prop_assert!(validate_batch(&b, &defs(&required)).is_empty());
        }
    }
}
