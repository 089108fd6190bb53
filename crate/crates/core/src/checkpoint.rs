//! Checkpoint files: a JSON envelope with base64 little-endian `f64` payloads,
//! partial (per-model) loading, and best-model tracking.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{NumericError, ParamState};
use crate::pipeline::{Component, Pipeline};
use crate::{Error, NDArray, Optimizer, ParameterStore, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Name of the checkpoint kept for the lowest validation loss.
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {message}")]
    Io { path: String, message: String },
    #[error("checkpoint {path} is malformed: {message}")]
    Format { path: String, message: String },
    #[error("checkpoint format version {0} is not supported")]
    Version(u32),
    #[error("checkpoint has no model '{name}' (available: {})", available.join(", "))]
    MissingModel { name: String, available: Vec<String> },
    #[error("parameter '{param}' of '{model}' has shape {actual:?} in the checkpoint, component expects {expected:?}")]
    ParameterShape {
        model: String,
        param: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("parameter set of '{model}' differs from the checkpoint: {message}")]
    ParameterNames { model: String, message: String },
    #[error("component '{0}' has no parameters to load")]
    NotAModel(String),
    #[error("invalid array payload: {0}")]
    Payload(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedArray {
    pub shape: Vec<usize>,
    /// Base64 of the row-major elements as little-endian `f64`.
    pub data: String,
}

impl EncodedArray {
    pub fn encode(array: &NDArray) -> Self {
        let bytes: Vec<u8> = array.data().iter().flat_map(|x| x.to_le_bytes()).collect();
        Self {
            shape: array.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<NDArray, CheckpointError> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| CheckpointError::Payload(e.to_string()))?;
        if bytes.len() % 8 != 0 {
            return Err(CheckpointError::Payload(format!(
                "{} bytes is not a multiple of 8",
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        NDArray::from_vec(self.shape.clone(), data).map_err(|e| CheckpointError::Payload(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingStatus {
    pub episode: u64,
    pub epoch: u64,
    /// `None` until a validation loss has been recorded.
    pub best_validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedParamState {
    pub step: u64,
    pub buffers: BTreeMap<String, EncodedArray>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub kind: String,
    /// Keyed by `<model>/<parameter>`.
    pub params: BTreeMap<String, EncodedParamState>,
}

pub type ModelPayload = BTreeMap<String, EncodedArray>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub timestamp: String,
    pub status: TrainingStatus,
    pub models: BTreeMap<String, ModelPayload>,
    pub optimizer_state: Option<OptimizerState>,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    models: BTreeMap<String, serde::de::IgnoredAny>,
}

fn io_err(path: &Path, e: impl ToString) -> CheckpointError {
    CheckpointError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl Checkpoint {
    /// Snapshot of every model in the pipeline and, optionally, the optimizer.
    pub fn capture(
        pipeline: &Pipeline,
        status: TrainingStatus,
        optimizer: Option<&Optimizer>,
        timestamp: impl Into<String>,
    ) -> Self {
        let models = pipeline
            .models()
            .into_iter()
            .map(|(name, store)| (name.to_string(), encode_store(store)))
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            timestamp: timestamp.into(),
            status,
            models,
            optimizer_state: optimizer.map(encode_optimizer),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoints always serialize")
    }

    /// Writes to a temporary sibling file and renames it over `path`.
    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(self.to_json().as_bytes()).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
        drop(f);
        fs::rename(&tmp, path).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let ckpt: Self = serde_json::from_str(&text).map_err(|e| CheckpointError::Format {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(ckpt.format_version));
        }
        Ok(ckpt)
    }

    pub fn model_names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn model(&self, name: &str) -> Result<BTreeMap<String, NDArray>, CheckpointError> {
        let payload = self.models.get(name).ok_or_else(|| CheckpointError::MissingModel {
            name: name.to_string(),
            available: self.model_names(),
        })?;
        payload.iter().map(|(k, v)| Ok((k.clone(), v.decode()?))).collect()
    }

    /// Replaces the values in `store` with the saved model `name`. The frozen flag is kept.
    pub fn load_model_into(&self, name: &str, store: &mut ParameterStore) -> Result<(), CheckpointError> {
        let values = self.model(name)?;
        store.replace_values(values).map_err(|e| match e {
            NumericError::ParameterShape {
                name: param,
                expected,
                actual,
            } => CheckpointError::ParameterShape {
                model: name.to_string(),
                param,
                expected,
                actual,
            },
            other => CheckpointError::ParameterNames {
                model: name.to_string(),
                message: other.to_string(),
            },
        })
    }

    pub fn optimizer_params(&self) -> Result<Option<BTreeMap<String, ParamState<f64>>>, CheckpointError> {
        let Some(state) = &self.optimizer_state else {
            return Ok(None);
        };
        state
            .params
            .iter()
            .map(|(k, s)| {
                let buffers = s
                    .buffers
                    .iter()
                    .map(|(b, arr)| Ok((b.clone(), arr.decode()?)))
                    .collect::<Result<_, CheckpointError>>()?;
                Ok((k.clone(), ParamState { step: s.step, buffers }))
            })
            .collect::<Result<_, _>>()
            .map(Some)
    }
}

fn encode_store(store: &ParameterStore) -> ModelPayload {
    store
        .iter()
        .map(|(name, p)| (name.to_string(), EncodedArray::encode(&p.value)))
        .collect()
}

fn encode_optimizer(opt: &Optimizer) -> OptimizerState {
    OptimizerState {
        kind: opt.settings().name().to_string(),
        params: opt
            .state()
            .iter()
            .map(|(k, s)| {
                (
                    k.clone(),
                    EncodedParamState {
                        step: s.step,
                        buffers: s
                            .buffers
                            .iter()
                            .map(|(b, t)| (b.clone(), EncodedArray::encode(t)))
                            .collect(),
                    },
                )
            })
            .collect(),
    }
}

pub fn now_timestamp() -> String {
    chrono::Local::now().to_rfc3339()
}

/// Saves every model of the pipeline (and the optimizer state) atomically.
pub fn save_checkpoint(
    pipeline: &Pipeline,
    status: TrainingStatus,
    optimizer: Option<&Optimizer>,
    path: &Path,
) -> Result<(), CheckpointError> {
    Checkpoint::capture(pipeline, status, optimizer, now_timestamp()).write(path)
}

/// Model names stored in a checkpoint, read without decoding any payload.
pub fn list_models(path: &Path) -> Result<Vec<String>, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| CheckpointError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(CheckpointError::Version(header.format_version));
    }
    Ok(header.models.into_keys().collect())
}

/// Loads saved model `saved_name` from `checkpoint_path` into `component`.
pub fn load_into_component(
    checkpoint_path: &Path,
    saved_name: &str,
    component: &mut dyn Component,
) -> Result<(), CheckpointError> {
    let ckpt = Checkpoint::read(checkpoint_path)?;
    let name = component.name().to_string();
    let store = component.parameters_mut().ok_or(CheckpointError::NotAModel(name))?;
    ckpt.load_model_into(saved_name, store)
}

/// Applies every `load:` entry of the pipeline's component configurations.
/// Returns the names of the components that were loaded.
pub fn apply_configured_loads(pipeline: &mut Pipeline) -> Result<Vec<String>> {
    let requests: Vec<(String, crate::config::LoadSpec)> = pipeline
        .models()
        .iter()
        .filter_map(|(name, _)| {
            pipeline
                .component(name)
                .and_then(|c| c.config().load_from.clone())
                .map(|l| (name.to_string(), l))
        })
        .collect();
    let mut cache: BTreeMap<PathBuf, Checkpoint> = BTreeMap::new();
    let mut loaded = Vec::new();
    for (name, spec) in requests {
        let wrap = |e: CheckpointError| Error::Component {
            name: name.clone(),
            priority: None,
            source: Box::new(e.into()),
        };
        if !cache.contains_key(&spec.file) {
            let ckpt = Checkpoint::read(&spec.file).map_err(wrap)?;
            cache.insert(spec.file.clone(), ckpt);
        }
        let ckpt = &cache[&spec.file];
        let component = pipeline.component_mut(&name).expect("listed above");
        let store = component.parameters_mut().expect("listed as a model");
        ckpt.load_model_into(&spec.model, store).map_err(wrap)?;
        log::info!("{name}: loaded '{}' from {}", spec.model, spec.file.display());
        loaded.push(name);
    }
    Ok(loaded)
}

/// Saves `best.ckpt` into `dir` when `validation_loss` strictly improves on
/// `status.best_validation_loss`, updating the status. Returns whether it saved.
pub fn track_best(
    status: &mut TrainingStatus,
    validation_loss: f64,
    pipeline: &Pipeline,
    optimizer: Option<&Optimizer>,
    dir: &Path,
) -> Result<bool, CheckpointError> {
    if !validation_loss.is_finite() {
        return Ok(false);
    }
    let improved = status.best_validation_loss.is_none_or(|best| validation_loss < best);
    if improved {
        status.best_validation_loss = Some(validation_loss);
        save_checkpoint(pipeline, *status, optimizer, &dir.join(BEST_CHECKPOINT))?;
    }
    Ok(improved)
}
