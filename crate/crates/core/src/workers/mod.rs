//! Pipeline-agnostic drivers: offline trainer, online trainer, processor.

mod experiment;
mod offline;
mod online;
mod processor;

use std::collections::BTreeMap;
use std::path::PathBuf;

pub use experiment::{
    assemble_config, create_experiment_dir, Experiment, ExperimentLog, CONFIG_COPY, EXPORTS_DIR, LOG_FILE,
};
pub use offline::run_offline_trainer;
pub use online::run_online_trainer;
pub use processor::run_processor;

use crate::checkpoint::{apply_configured_loads, TrainingStatus};
use crate::config::{ConfigTree, GlobalParams, Section};
use crate::numeric::{OptimizerKind, OptimizerSettings};
use crate::pipeline::{build_pipeline_for, ComponentFactory, Mode, Pipeline};
use crate::stats::{StatisticsAggregation, StatisticsCollector};
use crate::stream::Batch;
use crate::{Error, Optimizer, Result};

/// Exit status of a worker run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;

pub fn exit_code(result: &Result<RunSummary>) -> i32 {
    match result {
        Ok(_) => EXIT_OK,
        Err(e) if e.is_numeric_failure() => EXIT_NUMERIC,
        Err(_) => EXIT_CONFIG,
    }
}

#[derive(Debug, Clone, Default)]
pub struct WorkerOptions {
    /// Root under which each run gets its own timestamped directory.
    pub expdir: PathBuf,
    /// Batches prepared ahead on a producer thread; 0 assembles synchronously.
    pub prefetch: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub exp_dir: PathBuf,
    pub status: TrainingStatus,
    /// One aggregation per exported training row.
    pub training: Vec<StatisticsAggregation>,
    pub validation: Vec<StatisticsAggregation>,
    pub test: Option<StatisticsAggregation>,
}

impl RunSummary {
    fn new(exp_dir: PathBuf) -> Self {
        Self {
            exp_dir,
            status: TrainingStatus::default(),
            training: Vec::new(),
            validation: Vec::new(),
            test: None,
        }
    }

    /// Highest mean of `key` over the validation rows.
    pub fn best_validation(&self, key: &str) -> Option<f64> {
        self.validation
            .iter()
            .filter_map(|a| a.mean(key))
            .fold(None, |best, v| Some(best.map_or(v, |b: f64| b.max(v))))
    }
}

/// `training.terminal_conditions`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalConditions {
    /// Stop once the validation loss drops strictly below this.
    pub loss_stop: f64,
    pub max_epochs: Option<u64>,
    pub max_episodes: Option<u64>,
    pub validation_interval: Option<u64>,
}

impl TerminalConditions {
    pub const DEFAULT_LOSS_STOP: f64 = 1e-5;

    pub fn from_config(config: &ConfigTree) -> Result<Self> {
        let base = "training.terminal_conditions";
        let number = |key: &str| -> Result<Option<f64>> {
            match config.get(&format!("{base}.{key}")) {
                None => Ok(None),
                Some(v) => v
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::invalid(format!("{base}.{key} must be a number, found '{v}'"))),
            }
        };
        let count =
            |key: &str| -> Result<Option<u64>> {
                match config.get(&format!("{base}.{key}")) {
                    None => Ok(None),
                    Some(v) => v.as_i64().filter(|n| *n >= 0).map(|n| Some(n as u64)).ok_or_else(|| {
                        Error::invalid(format!("{base}.{key} must be a non-negative integer, found '{v}'"))
                    }),
                }
            };
        let loss_stop = number("loss_stop")?.unwrap_or(Self::DEFAULT_LOSS_STOP);
        if loss_stop.is_nan() {
            return Err(Error::invalid(format!("{base}.loss_stop is NaN")));
        }
        let validation_interval = count("validation_interval")?;
        if validation_interval == Some(0) {
            return Err(Error::invalid(format!("{base}.validation_interval must be positive")));
        }
        Ok(Self {
            loss_stop,
            max_epochs: count("max_epochs")?,
            max_episodes: count("max_episodes")?,
            validation_interval,
        })
    }
}

/// `training.optimizer`: `type` (sgd | adam), `lr`, and the kind's hyperparameters.
pub fn optimizer_from_config(config: &ConfigTree) -> Result<Optimizer> {
    let base = "training.optimizer";
    let get = |key: &str, default: f64| -> Result<f64> {
        match config.get(&format!("{base}.{key}")) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::invalid(format!("{base}.{key} must be a number, found '{v}'"))),
        }
    };
    let kind = match config.get(&format!("{base}.type")) {
        None => "sgd",
        Some(v) => v
            .as_str()
            .ok_or_else(|| Error::invalid(format!("{base}.type must be a string")))?,
    };
    let settings = match kind {
        "sgd" => OptimizerSettings::sgd(get("lr", 0.01)?, get("momentum", 0.0)?),
        "adam" => {
            let mut s = OptimizerSettings::adam(get("lr", 0.001)?);
            if let OptimizerKind::Adam { beta1, beta2, epsilon } = &mut s.kind {
                *beta1 = get("beta1", *beta1)?;
                *beta2 = get("beta2", *beta2)?;
                *epsilon = get("epsilon", *epsilon)?;
            }
            s
        }
        other => return Err(Error::invalid(format!("{base}.type: unknown optimizer '{other}'"))),
    };
    Ok(Optimizer::new(settings)?)
}

/// Builds, initializes and handshakes a pipeline over `sections`, then
/// applies configured `load:` entries. Every diagnostic is logged and returned.
pub fn prepare_pipeline(
    config: &ConfigTree,
    factory: &ComponentFactory,
    sections: &[Section],
    exp: &mut Experiment,
) -> Result<Pipeline> {
    let mut pipeline = build_pipeline_for(config, factory, sections)?;
    let mut globals = GlobalParams::new();
    let mut diags = pipeline.initialize(&mut globals, Some(&exp.exports_dir()));
    for &section in sections {
        for d in pipeline.handshake(section) {
            if !diags.contains(&d) {
                diags.push(d);
            }
        }
    }
    if !diags.is_empty() {
        for d in &diags {
            exp.log.error(d.to_string());
        }
        return Err(Error::Handshake(diags));
    }
    for (key, entry) in globals.iter() {
        exp.log
            .debug(format!("global {key} = {} (from {})", entry.value, entry.publisher));
    }
    for name in apply_configured_loads(&mut pipeline)? {
        exp.log.info(format!("loaded parameters of '{name}'"));
    }
    Ok(pipeline)
}

fn require_training_roles(pipeline: &Pipeline) -> Result<()> {
    if pipeline.models().is_empty() {
        return Err(Error::invalid("training requires at least one model component"));
    }
    if pipeline.loss_names(Section::Training).is_empty() {
        return Err(Error::NoLoss(Section::Training));
    }
    Ok(())
}

/// One optimization step on `batch`; statistics go to `collector`.
fn train_batch(
    pipeline: &mut Pipeline,
    optimizer: &mut Optimizer,
    weights: &BTreeMap<String, f64>,
    batch: Batch,
    collector: &mut StatisticsCollector,
) -> Result<()> {
    pipeline.zero_grads();
    let out = pipeline.forward(Section::Training, Mode::Train, batch)?;
    pipeline.backward(Section::Training, &out, weights)?;
    for (name, store) in pipeline.models_mut() {
        optimizer.step(&name, store);
    }
    pipeline.collect_statistics(Section::Training, &out, collector)?;
    collector.end_batch();
    Ok(())
}

/// Eval-mode forward pass without gradient work.
fn evaluate_batch(
    pipeline: &mut Pipeline,
    section: Section,
    batch: Batch,
    collector: &mut StatisticsCollector,
) -> Result<()> {
    let out = pipeline.forward(section, Mode::Eval, batch)?;
    pipeline.collect_statistics(section, &out, collector)?;
    collector.end_batch();
    Ok(())
}

/// Sum of the means of every loss statistic active in `section`.
fn section_loss(pipeline: &Pipeline, section: Section, agg: &StatisticsAggregation) -> Result<f64> {
    let keys = pipeline.loss_statistic_keys(section);
    if keys.is_empty() {
        return Err(Error::NoLoss(section));
    }
    keys.iter().map(|k| agg.mean(k).ok_or(Error::NoLoss(section))).sum()
}

fn describe(agg: &StatisticsAggregation) -> String {
    agg.stats
        .iter()
        .map(|(k, s)| format!("{k}={}", crate::stats::format_g6(s.mean)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Logs the failure and the training state before handing the error back.
fn log_failure(exp: &mut Experiment, status: &TrainingStatus, err: Error) -> Error {
    exp.log.error(format!("run aborted: {err}"));
    exp.log.error(format!(
        "state: episode {} epoch {} best validation loss {}",
        status.episode,
        status.epoch,
        status
            .best_validation_loss
            .map_or("none".to_string(), |l| l.to_string())
    ));
    err
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(src: &str) -> ConfigTree {
        ConfigTree::from_yaml_str(src, "test").unwrap()
    }

    #[test]
    fn terminal_defaults() {
        let t = TerminalConditions::from_config(&tree("{}")).unwrap();
        assert_eq!(t.loss_stop, 1e-5);
        assert_eq!(t.max_epochs, None);
        let t = TerminalConditions::from_config(&tree("{training: {terminal_conditions: {max_epochs: 3}}}")).unwrap();
        assert_eq!(t.max_epochs, Some(3));
        assert!(TerminalConditions::from_config(&tree("{training: {terminal_conditions: {max_epochs: -1}}}")).is_err());
        assert!(
            TerminalConditions::from_config(&tree("{training: {terminal_conditions: {validation_interval: 0}}}"))
                .is_err()
        );
    }

    #[test]
    fn optimizer_kinds() {
        let o = optimizer_from_config(&tree("{training: {optimizer: {type: adam, lr: 0.01, beta1: 0.8}}}")).unwrap();
        assert_eq!(o.settings().name(), "adam");
        assert!(matches!(o.settings().kind, OptimizerKind::Adam { beta1, .. } if beta1 == 0.8));
        let o = optimizer_from_config(&tree("{}")).unwrap();
        assert_eq!(o.settings().name(), "sgd");
        assert!(optimizer_from_config(&tree("{training: {optimizer: {type: rmsprop}}}")).is_err());
        assert!(optimizer_from_config(&tree("{training: {optimizer: {lr: -1}}}")).is_err());
    }
}
