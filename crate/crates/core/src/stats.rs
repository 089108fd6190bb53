//! Per-batch statistics, their per-phase aggregation, and CSV export.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use thiserror::Error;

use crate::config::Section;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("statistic '{key}' is not finite ({value})")]
    NonFinite { key: String, value: f64 },
    #[error("nothing was collected since the last aggregation")]
    Empty,
    #[error("statistic columns changed for {phase}: expected {expected:?}, got {actual:?}")]
    ColumnsChanged {
        phase: Section,
        expected: Vec<String>,
        actual: Vec<String>,
    },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

/// Series of `(batch_size, value)` pairs per statistic for the current phase.
#[derive(Debug, Clone, Default)]
pub struct StatisticsCollector {
    series: IndexMap<String, Vec<(usize, f64)>>,
    batches: usize,
}

impl StatisticsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn collect(&mut self, key: &str, value: f64, batch_size: usize) -> Result<(), StatsError> {
        if !value.is_finite() {
            return Err(StatsError::NonFinite {
                key: key.to_string(),
                value,
            });
        }
        self.series
            .entry(key.to_string())
            .or_default()
            .push((batch_size, value));
        Ok(())
    }

    /// Marks the end of one batch's collection.
    pub fn end_batch(&mut self) {
        self.batches += 1;
    }

    pub fn series(&self, key: &str) -> Option<&[(usize, f64)]> {
        self.series.get(key).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.series.values().all(Vec::is_empty)
    }

    /// Summarizes and resets the collector.
    pub fn aggregate(&mut self, episode: u64, epoch: u64) -> Result<StatisticsAggregation, StatsError> {
        if self.is_empty() {
            return Err(StatsError::Empty);
        }
        let stats = self
            .series
            .drain(..)
            .filter(|(_, s)| !s.is_empty())
            .map(|(k, s)| (k, Summary::of(&s)))
            .collect();
        let batches = std::mem::take(&mut self.batches);
        Ok(StatisticsAggregation {
            stats,
            episode,
            epoch,
            batches,
        })
    }
}

/// Batch-size-weighted mean, unweighted min/max, and population standard
/// deviation of the per-batch values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub std: f64,
}

impl Summary {
    fn of(series: &[(usize, f64)]) -> Self {
        let total: f64 = series.iter().map(|&(n, _)| n as f64).sum();
        let mean = series.iter().map(|&(n, v)| n as f64 * v).sum::<f64>() / total;
        let min = series.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let max = series.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        let k = series.len() as f64;
        let plain_mean = series.iter().map(|&(_, v)| v).sum::<f64>() / k;
        let var = series.iter().map(|&(_, v)| (v - plain_mean).powi(2)).sum::<f64>() / k;
        Self {
            // keep min <= mean <= max despite rounding
            mean: mean.clamp(min, max),
            min,
            max,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticsAggregation {
    pub stats: BTreeMap<String, Summary>,
    pub episode: u64,
    pub epoch: u64,
    pub batches: usize,
}

impl StatisticsAggregation {
    pub fn mean(&self, key: &str) -> Option<f64> {
        self.stats.get(key).map(|s| s.mean)
    }
}

/// Formats like C's `%.6g`.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes one CSV file per phase (`training.csv`, ...) into a directory.
/// The first row written by an exporter truncates the file and writes the header.
#[derive(Debug)]
pub struct StatsExporter {
    dir: PathBuf,
    columns: BTreeMap<Section, Vec<String>>,
}

impl StatsExporter {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            columns: BTreeMap::new(),
        }
    }

    pub fn path(&self, phase: Section) -> PathBuf {
        self.dir.join(format!("{phase}.csv"))
    }

    pub fn export(&mut self, agg: &StatisticsAggregation, phase: Section) -> Result<(), StatsError> {
        let keys: Vec<String> = agg.stats.keys().cloned().collect();
        let path = self.path(phase);
        let io = |e: std::io::Error| StatsError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut file = match self.columns.get(&phase) {
            Some(existing) if *existing != keys => {
                return Err(StatsError::ColumnsChanged {
                    phase,
                    expected: existing.clone(),
                    actual: keys,
                })
            }
            Some(_) => OpenOptions::new().append(true).open(&path).map_err(io)?,
            None => {
                let mut f = File::create(&path).map_err(io)?;
                let header: Vec<String> = ["episode".to_string(), "epoch".to_string()]
                    .into_iter()
                    .chain(keys.iter().map(|k| format!("{k}_mean")))
                    .collect();
                writeln!(f, "{}", header.join(",")).map_err(io)?;
                self.columns.insert(phase, keys.clone());
                f
            }
        };
        let mut row = vec![agg.episode.to_string(), agg.epoch.to_string()];
        row.extend(agg.stats.values().map(|s| format_g6(s.mean)));
        writeln!(file, "{}", row.join(",")).map_err(io)
    }
}

/// One-shot export of a single aggregation into `dir/<phase>.csv`.
pub fn export_csv(agg: &StatisticsAggregation, dir: &Path, phase: Section) -> Result<(), StatsError> {
    StatsExporter::new(dir).export(agg, phase)
}
