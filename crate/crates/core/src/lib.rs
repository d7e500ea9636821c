//! Attention-based encoder-decoder models with target-side context:
//! a baseline decoder, memory and self-attentive RNN decoders, and mean or
//! self-attentive residual connections over previously emitted words.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod structure;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Tape32 = tensor::Tape<f32>;
pub type Tape64 = tensor::Tape<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type ModelParams64 = model::ModelParams<f64>;
