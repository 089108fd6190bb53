use std::collections::BTreeMap;

use super::{NumericError, ParameterStore, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub lr: f64,
    pub kind: OptimizerKind,
}

impl OptimizerSettings {
    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            kind: OptimizerKind::Sgd { momentum },
        }
    }

    pub fn adam(lr: f64) -> Self {
        Self {
            lr,
            kind: OptimizerKind::Adam {
                beta1: 0.9,
                beta2: 0.999,
                epsilon: 1e-8,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::Adam { .. } => "adam",
        }
    }

    pub fn validate(&self) -> Result<(), NumericError> {
        let bad = |what: &str| Err(NumericError::InvalidHyperParameter(what.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be > 0");
        }
        match self.kind {
            OptimizerKind::Sgd { momentum } if !(momentum >= 0.0) => bad("momentum must be >= 0"),
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    bad("beta1 and beta2 must lie in [0, 1)")
                } else if !(epsilon > 0.0) {
                    bad("epsilon must be > 0")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Per-parameter optimizer state: a step counter and named moment buffers
/// (`velocity` for SGD, `m`/`v` for Adam).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState<T> {
    pub step: u64,
    pub buffers: BTreeMap<String, Tensor<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer<T> {
    settings: OptimizerSettings,
    state: BTreeMap<String, ParamState<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(settings: OptimizerSettings) -> Result<Self, NumericError> {
        settings.validate()?;
        Ok(Self {
            settings,
            state: BTreeMap::new(),
        })
    }

    pub fn settings(&self) -> &OptimizerSettings {
        &self.settings
    }

    /// State keyed by `<owner>/<parameter>`.
    pub fn state(&self) -> &BTreeMap<String, ParamState<T>> {
        &self.state
    }

    pub fn restore_state(&mut self, state: BTreeMap<String, ParamState<T>>) {
        self.state = state;
    }

    /// Updates every parameter of `store` from its gradient, then zeroes the
    /// gradients. Frozen stores keep their values and only have gradients zeroed.
    pub fn step(&mut self, owner: &str, store: &mut ParameterStore<T>) {
        if store.is_frozen() {
            store.zero_grads();
            return;
        }
        let lr = T::of(self.settings.lr);
        for (name, p) in store.iter_mut() {
            let key = format!("{owner}/{name}");
            let st = self.state.entry(key).or_insert_with(|| ParamState {
                step: 0,
                buffers: BTreeMap::new(),
            });
            st.step += 1;
            match self.settings.kind {
                OptimizerKind::Sgd { momentum } => {
                    let mu = T::of(momentum);
                    let v = st
                        .buffers
                        .entry("velocity".into())
                        .or_insert_with(|| p.value.zeros_like());
                    for ((w, vel), &g) in p.value.data_mut().iter_mut().zip(v.data_mut()).zip(p.grad.data()) {
                        *vel = mu * *vel + g;
                        *w -= lr * *vel;
                    }
                }
                OptimizerKind::Adam { beta1, beta2, epsilon } => {
                    let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(epsilon));
                    let t = st.step as i32;
                    let c1 = T::one() - b1.powi(t);
                    let c2 = T::one() - b2.powi(t);
                    let mut m = st.buffers.remove("m").unwrap_or_else(|| p.value.zeros_like());
                    let mut v = st.buffers.remove("v").unwrap_or_else(|| p.value.zeros_like());
                    for (((w, mi), vi), &g) in p
                        .value
                        .data_mut()
                        .iter_mut()
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                        .zip(p.grad.data())
                    {
                        *mi = b1 * *mi + (T::one() - b1) * g;
                        *vi = b2 * *vi + (T::one() - b2) * g * g;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    st.buffers.insert("m".into(), m);
                    st.buffers.insert("v".into(), v);
                }
            }
            p.grad.fill(T::zero());
        }
    }
}
