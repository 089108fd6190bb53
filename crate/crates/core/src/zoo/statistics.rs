use crate::config::ComponentConfig;
use crate::pipeline::{Component, InitContext, Mode, Role};
use crate::stats::StatisticsCollector;
use crate::stream::{Batch, Definitions, Dim, StreamDefinition};
use crate::{Error, NDArray, Result};

pub const ACCURACY_DEFAULTS: &str = "
statistic: accuracy
";

/// Fraction of rows whose argmax (lowest index on ties) equals the target.
pub struct Accuracy {
    cfg: ComponentConfig,
}

impl Accuracy {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        cfg.param_str("statistic")?;
        Ok(Self { cfg })
    }

    pub fn value(predictions: &NDArray, targets: &[usize]) -> Result<f64> {
        predictions.require_rank(2)?;
        if predictions.rows() != targets.len() || targets.is_empty() {
            return Err(Error::invalid(format!(
                "{} prediction rows for {} targets",
                predictions.rows(),
                targets.len()
            )));
        }
        let hits = predictions
            .argmax_rows()
            .iter()
            .zip(targets)
            .filter(|(p, t)| p == t)
            .count();
        Ok(hits as f64 / targets.len() as f64)
    }
}

impl Component for Accuracy {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Statistic
    }

    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        Definitions::from([
            ("predictions".into(), StreamDefinition::array(&[Dim::Any], "scores")),
            ("targets".into(), StreamDefinition::indices(None, "class indices")),
        ])
    }

    fn output_definitions(&self) -> Definitions {
        Definitions::new()
    }

    fn execute(&mut self, _batch: &mut Batch, _mode: Mode) -> Result<()> {
        Ok(())
    }

    fn statistic_keys(&self) -> Vec<String> {
        vec![self.cfg.param_str("statistic").unwrap_or("accuracy").to_string()]
    }

    fn collect_statistics(&self, batch: &Batch, collector: &mut StatisticsCollector) -> Result<()> {
        let acc = Self::value(
            batch.array(self.cfg.stream("predictions"))?,
            batch.indices(self.cfg.stream("targets"))?,
        )?;
        collector.collect(self.cfg.param_str("statistic")?, acc, batch.batch_size())?;
        Ok(())
    }
}
