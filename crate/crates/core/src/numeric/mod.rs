//! Dense arrays, differentiable primitives, parameter stores and optimizers.
//!
//! Everything here is generic over [`Scalar`]; pipelines instantiate it with `f64`.

mod ops;
mod optim;
mod params;
mod scalar;
mod tensor;

use thiserror::Error;

pub use ops::{activation, activation_backward, dropout, dropout_backward, Activation, DropoutMode};
pub use optim::{Optimizer, OptimizerKind, OptimizerSettings, ParamState};
pub use params::{Parameter, ParameterStore};
pub use scalar::Scalar;
pub use tensor::{matmul, matmul_backward, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("invalid shape {0:?}: dimensions must be >= 1")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} needs {} elements, got {len}", shape.iter().product::<usize>())]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("expected rank {expected}, got shape {actual:?}")]
    RankMismatch { expected: usize, actual: Vec<usize> },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("inner dimensions differ: {left:?} x {right:?}")]
    InnerDimMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("index {index} out of range (< {bound})")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("unknown activation '{0}'")]
    UnknownActivation(String),
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("invalid optimizer setting: {0}")]
    InvalidHyperParameter(String),
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("parameter '{name}' has shape {actual:?}, expected {expected:?}")]
    ParameterShape {
        name: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
}
