use crate::config::ComponentConfig;
use crate::pipeline::{Component, GradTable, InitContext, Mode, Role};
use crate::stats::StatisticsCollector;
use crate::stream::{Batch, Definitions, Dim, StreamDefinition, Value};
use crate::{Error, NDArray, Result};

pub const DEFAULTS: &str = "
weight: 1.0
statistic: loss
";

fn loss_outputs() -> Definitions {
    Definitions::from([("loss".into(), StreamDefinition::scalar("batch loss"))])
}

/// Upstream gradient of the scalar loss stream; `None` when nothing flows back.
fn loss_grad(cfg: &ComponentConfig, grads: &GradTable) -> Option<f64> {
    grads.get(cfg.stream("loss")).map(|g| g.sum())
}

fn publish(cfg: &ComponentConfig, batch: &mut Batch, loss: f64) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            name: cfg.name.clone(),
            value: loss,
        });
    }
    batch.insert(cfg.stream("loss"), Value::Scalar(loss))?;
    Ok(())
}

fn report(cfg: &ComponentConfig, batch: &Batch, collector: &mut StatisticsCollector) -> Result<()> {
    let value = batch.scalar(cfg.stream("loss"))?;
    collector.collect(cfg.param_str("statistic")?, value, batch.batch_size())?;
    Ok(())
}

/// Negative log-likelihood of the target class over row-wise log-probabilities.
pub struct NllLoss {
    cfg: ComponentConfig,
}

impl NllLoss {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        cfg.param_f64("weight")?;
        cfg.param_str("statistic")?;
        Ok(Self { cfg })
    }

    pub fn value(predictions: &NDArray, targets: &[usize]) -> Result<f64> {
        predictions.require_rank(2)?;
        if predictions.rows() != targets.len() {
            return Err(Error::invalid(format!(
                "{} prediction rows for {} targets",
                predictions.rows(),
                targets.len()
            )));
        }
        let classes = predictions.row_len();
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            if t >= classes {
                return Err(Error::invalid(format!("target {t} out of range for {classes} classes")));
            }
            total -= predictions.get2(i, t);
        }
        let loss = total / targets.len() as f64;
        Ok(loss)
    }
}

impl Component for NllLoss {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Loss
    }

    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        Definitions::from([
            (
                "predictions".into(),
                StreamDefinition::array(&[Dim::Any], "log-probabilities"),
            ),
            ("targets".into(), StreamDefinition::indices(None, "class indices")),
        ])
    }

    fn output_definitions(&self) -> Definitions {
        loss_outputs()
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let loss = Self::value(
            batch.array(self.cfg.stream("predictions"))?,
            batch.indices(self.cfg.stream("targets"))?,
        )?;
        publish(&self.cfg, batch, loss)
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn backward(&mut self, batch: &Batch, grads: &mut GradTable) -> Result<()> {
        let Some(upstream) = loss_grad(&self.cfg, grads) else {
            return Ok(());
        };
        let predictions = batch.array(self.cfg.stream("predictions"))?;
        let targets = batch.indices(self.cfg.stream("targets"))?;
        let mut g = predictions.zeros_like();
        let cols = predictions.row_len();
        let scale = -upstream / targets.len() as f64;
        for (i, &t) in targets.iter().enumerate() {
            g.data_mut()[i * cols + t] = scale;
        }
        grads.accumulate(self.cfg.stream("predictions"), g)?;
        Ok(())
    }

    fn statistic_keys(&self) -> Vec<String> {
        vec![self.cfg.param_str("statistic").unwrap_or("loss").to_string()]
    }

    fn collect_statistics(&self, batch: &Batch, collector: &mut StatisticsCollector) -> Result<()> {
        report(&self.cfg, batch, collector)
    }
}

/// Mean squared error over every element.
pub struct MseLoss {
    cfg: ComponentConfig,
}

impl MseLoss {
    pub fn new(cfg: ComponentConfig) -> Result<Self> {
        cfg.param_f64("weight")?;
        cfg.param_str("statistic")?;
        Ok(Self { cfg })
    }

    pub fn value(predictions: &NDArray, targets: &NDArray) -> Result<f64> {
        predictions.require_same_shape(targets)?;
        let n = predictions.len() as f64;
        let loss = predictions
            .data()
            .iter()
            .zip(targets.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        Ok(loss)
    }
}

impl Component for MseLoss {
    fn config(&self) -> &ComponentConfig {
        &self.cfg
    }

    fn role(&self) -> Role {
        Role::Loss
    }

    fn initialize(&mut self, _ctx: &mut InitContext<'_>) -> Result<()> {
        Ok(())
    }

    fn input_definitions(&self) -> Definitions {
        Definitions::from([
            (
                "predictions".into(),
                StreamDefinition::array(&[Dim::Any], "predictions"),
            ),
            (
                "targets".into(),
                StreamDefinition::array(&[Dim::Any], "regression targets"),
            ),
        ])
    }

    fn output_definitions(&self) -> Definitions {
        loss_outputs()
    }

    fn execute(&mut self, batch: &mut Batch, _mode: Mode) -> Result<()> {
        let loss = Self::value(
            batch.array(self.cfg.stream("predictions"))?,
            batch.array(self.cfg.stream("targets"))?,
        )?;
        publish(&self.cfg, batch, loss)
    }

    fn is_differentiable(&self) -> bool {
        true
    }

    fn backward(&mut self, batch: &Batch, grads: &mut GradTable) -> Result<()> {
        let Some(upstream) = loss_grad(&self.cfg, grads) else {
            return Ok(());
        };
        let p = batch.array(self.cfg.stream("predictions"))?;
        let t = batch.array(self.cfg.stream("targets"))?;
        let scale = 2.0 * upstream / p.len() as f64;
        let gp = p.zip_map(t, |a, b| scale * (a - b))?;
        grads.accumulate(self.cfg.stream("targets"), gp.scale(-1.0))?;
        grads.accumulate(self.cfg.stream("predictions"), gp)?;
        Ok(())
    }

    fn statistic_keys(&self) -> Vec<String> {
        vec![self.cfg.param_str("statistic").unwrap_or("loss").to_string()]
    }

    fn collect_statistics(&self, batch: &Batch, collector: &mut StatisticsCollector) -> Result<()> {
        report(&self.cfg, batch, collector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve_component_config, ConfigTree};

    fn cfg() -> ComponentConfig {
        let d = ConfigTree::from_yaml_str(DEFAULTS, "").unwrap();
        resolve_component_config(&d, &ConfigTree::from_yaml_str("{type: l}", "").unwrap(), "loss").unwrap()
    }

    #[test]
    fn uniform_nll_is_ln2() {
        let p = NDArray::full(vec![3, 2], 0.5f64.ln()).unwrap();
        let l = NllLoss::value(&p, &[0, 1, 1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn perfect_nll_is_zero() {
        let p = NDArray::from_rows(&[vec![0.0, f64::NEG_INFINITY], vec![f64::NEG_INFINITY, 0.0]]).unwrap();
        assert_eq!(NllLoss::value(&p, &[0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn nll_gradient_sits_on_targets() {
        let mut l = NllLoss::new(cfg()).unwrap();
        let mut b = Batch::new(vec![0, 1]).unwrap();
        b.insert("predictions", Value::Array(NDArray::full(vec![2, 3], -1.0).unwrap()))
            .unwrap();
        b.insert("targets", Value::Indices(vec![2, 0])).unwrap();
        l.execute(&mut b, Mode::Train).unwrap();
        let mut g = GradTable::new();
        g.accumulate("loss", NDArray::scalar(1.0)).unwrap();
        l.backward(&b, &mut g).unwrap();
        assert_eq!(g.get("predictions").unwrap().data(), &[0., 0., -0.5, -0.5, 0., 0.]);
    }

    #[test]
    fn nll_rejects_out_of_range_target() {
        assert!(NllLoss::value(&NDArray::zeros(vec![1, 2]).unwrap(), &[2]).is_err());
    }

    #[test]
    fn non_finite_loss_is_numeric_failure() {
        let mut l = NllLoss::new(cfg()).unwrap();
        let mut b = Batch::new(vec![0]).unwrap();
        b.insert(
            "predictions",
            Value::Array(NDArray::from_rows(&[vec![f64::NAN, 0.0]]).unwrap()),
        )
        .unwrap();
        b.insert("targets", Value::Indices(vec![0])).unwrap();
        let err = l.execute(&mut b, Mode::Train).unwrap_err();
        assert!(err.is_numeric_failure(), "{err}");
    }

    #[test]
    fn mse_values() {
        let p = NDArray::from_rows(&[vec![6.0]]).unwrap();
        let t = NDArray::from_rows(&[vec![5.0]]).unwrap();
        assert_eq!(MseLoss::value(&p, &t).unwrap(), 1.0);
        assert_eq!(MseLoss::value(&p, &p).unwrap(), 0.0);
        assert!(MseLoss::value(&p, &NDArray::zeros(vec![1, 2]).unwrap()).is_err());
    }

    #[test]
    fn mse_gradient() {
        let mut l = MseLoss::new(cfg()).unwrap();
        let mut b = Batch::new(vec![0]).unwrap();
        b.insert(
            "predictions",
            Value::Array(NDArray::from_rows(&[vec![6.0, 1.0]]).unwrap()),
        )
        .unwrap();
        b.insert("targets", Value::Array(NDArray::from_rows(&[vec![5.0, 1.0]]).unwrap()))
            .unwrap();
        l.execute(&mut b, Mode::Train).unwrap();
        let mut g = GradTable::new();
        g.accumulate("loss", NDArray::scalar(1.0)).unwrap();
        l.backward(&b, &mut g).unwrap();
        assert_eq!(g.get("predictions").unwrap().data(), &[1.0, 0.0]);
        assert_eq!(g.get("targets").unwrap().data(), &[-1.0, 0.0]);
    }

    #[test]
    fn loss_is_reported_as_statistic() {
        let mut l = NllLoss::new(cfg()).unwrap();
        let mut b = Batch::new(vec![0, 1]).unwrap();
        b.insert(
            "predictions",
            Value::Array(NDArray::full(vec![2, 2], 0.5f64.ln()).unwrap()),
        )
        .unwrap();
        b.insert("targets", Value::Indices(vec![0, 1])).unwrap();
        l.execute(&mut b, Mode::Eval).unwrap();
        let mut c = StatisticsCollector::new();
        l.collect_statistics(&b, &mut c).unwrap();
        assert_eq!(l.statistic_keys(), ["loss"]);
        assert_eq!(c.series("loss").unwrap().len(), 1);
    }
}
