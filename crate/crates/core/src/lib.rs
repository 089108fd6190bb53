//! Configuration-driven dataflow pipelines for training experiments.
//!
//! Numeric kernels are generic over [`numeric::Scalar`]; pipelines run on `f64`
//! through the aliases below.

mod error;

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod numeric;
pub mod pipeline;
pub mod stats;
pub mod stream;
pub mod workers;
pub mod zoo;

pub use error::{Error, Result};

pub type NDArray = numeric::Tensor<f64>;
pub type ParameterStore = numeric::ParameterStore<f64>;
pub type Optimizer = numeric::Optimizer<f64>;
