use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    rate: f64,
    pub mode: Mode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: Mode) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mode })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// Inverted dropout. Returns `(y, mask)` where the mask holds the per-unit
/// multiplier (0 or `1/(1-rate)`), so backward is `dout ⊙ mask`.
pub fn dropout(x: &Tensor, spec: DropoutSpec, rng: &mut impl Rng) -> (Tensor, Tensor) {
    if spec.mode == Mode::Eval || spec.rate == 0.0 {
        return (x.clone(), x.map(|_| 1.0));
    }
    let keep = 1.0 - spec.rate;
    let scale = 1.0 / keep;
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    let mask = Tensor::from_raw(x.shape().to_vec(), mask);
    let y = x.mul(&mask).expect("mask mirrors input shape");
    (y, mask)
}

pub fn dropout_backward(mask: &Tensor, dout: &Tensor) -> Result<Tensor> {
    dout.mul(mask)
}
