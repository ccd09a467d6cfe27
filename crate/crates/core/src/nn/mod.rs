//! Layer kernels with hand-written backward passes.
//!
//! Feature maps are `[h×w×c]`, row-major, channel fastest. Every op is a pure
//! function of its inputs; randomness (dropout) comes from a caller-supplied
//! generator.

mod activation;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{relu, relu_backward, softmax};
pub use conv::{ConvGrads, ConvLayer};
pub use dense::{DenseGrads, DenseLayer};
pub use dropout::{dropout, dropout_backward, DropoutSpec, Mode};
pub use pool::{maxpool2d_backward, maxpool2d_forward, pad_to, pad_to_backward, PoolSpec};

use crate::error::Result;
use crate::tensor::{Init, Tensor};

/// Glorot-uniform tensor: `U(-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`.
pub fn glorot_uniform(shape: &[usize], fan_in: usize, fan_out: usize, seed: u64) -> Result<Tensor> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::create(shape, Init::Uniform { limit, seed })
}
