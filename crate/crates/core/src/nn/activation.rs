use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes gradient where `x > 0`; the subgradient at 0 is taken as 0.
pub fn relu_backward(x: &Tensor, dout: &Tensor) -> Result<Tensor> {
    if x.shape() != dout.shape() {
        return Err(Error::shape(format!(
            "relu dOut {:?} vs input {:?}",
            dout.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(dout.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Ok(Tensor::from_raw(x.shape().to_vec(), data))
}

/// Max-shifted softmax over a rank-1 tensor.
pub fn softmax(z: &Tensor) -> Tensor {
    let m = z.max();
    let e = z.map(|v| (v - m).exp());
    let s = e.sum();
    e.map(|v| v / s)
}
