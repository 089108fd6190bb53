use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{NumericError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    LogSoftmax,
    Identity,
}

impl FromStr for Activation {
    type Err = NumericError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Self::Relu),
            "sigmoid" => Ok(Self::Sigmoid),
            "tanh" => Ok(Self::Tanh),
            "log_softmax" => Ok(Self::LogSoftmax),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(NumericError::UnknownActivation(other.to_string())),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Relu => "relu",
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::LogSoftmax => "log_softmax",
            Self::Identity => "identity",
        })
    }
}

/// Applies an activation. `LogSoftmax` works row-wise and requires rank 2.
pub fn activation<T: Scalar>(x: &Tensor<T>, kind: Activation) -> Result<Tensor<T>, NumericError> {
    Ok(match kind {
        Activation::Relu => x.map(|v| if v > T::zero() { v } else { T::zero() }),
        Activation::Sigmoid => x.map(|v| T::one() / (T::one() + (-v).exp())),
        Activation::Tanh => x.map(T::tanh),
        Activation::Identity => x.clone(),
        Activation::LogSoftmax => log_softmax_rows(x)?,
    })
}

fn log_softmax_rows<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>, NumericError> {
    x.require_rank(2)?;
    let cols = x.shape()[1];
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(cols) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_sum = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        row.iter_mut().for_each(|v| *v -= log_sum);
    }
    Ok(out)
}

/// Reverse rule for [`activation`]. `input` and `output` are the forward call's operands.
pub fn activation_backward<T: Scalar>(
    kind: Activation,
    input: &Tensor<T>,
    output: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<Tensor<T>, NumericError> {
    upstream.require_same_shape(output)?;
    match kind {
        Activation::Relu => input.zip_map(upstream, |x, g| if x > T::zero() { g } else { T::zero() }),
        Activation::Sigmoid => output.zip_map(upstream, |y, g| g * y * (T::one() - y)),
        Activation::Tanh => output.zip_map(upstream, |y, g| g * (T::one() - y * y)),
        Activation::Identity => Ok(upstream.clone()),
        Activation::LogSoftmax => {
            output.require_rank(2)?;
            let cols = output.shape()[1];
            let mut dx = upstream.clone();
            for (d, y) in dx.data_mut().chunks_mut(cols).zip(output.data().chunks(cols)) {
                let g_sum: T = d.iter().copied().sum();
                for (dv, &yv) in d.iter_mut().zip(y) {
                    *dv -= yv.exp() * g_sum;
                }
            }
            Ok(dx)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Eval,
}

/// Inverted dropout. Returns the output and, in train mode with `p > 0`, the
/// per-element scale mask (0 or `1/(1-p)`) needed by [`dropout_backward`].
pub fn dropout<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    p: f64,
    mode: DropoutMode,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Tensor<T>>), NumericError> {
    if !(0.0..1.0).contains(&p) {
        return Err(NumericError::InvalidProbability(p));
    }
    if mode == DropoutMode::Eval || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - p));
    let mut mask = x.zeros_like();
    for m in mask.data_mut() {
        *m = if rng.gen::<f64>() < p { T::zero() } else { keep };
    }
    let out = x.zip_map(&mask, |a, b| a * b)?;
    Ok((out, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&Tensor<T>>, upstream: &Tensor<T>) -> Result<Tensor<T>, NumericError> {
    match mask {
        Some(m) => upstream.zip_map(m, |g, s| g * s),
        None => Ok(upstream.clone()),
    }
}
