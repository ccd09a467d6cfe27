use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Borrowed affine layer: `weights` is `[in×out]`, `bias` is `[out]`.
#[derive(Debug, Clone, Copy)]
pub struct DenseLayer<'a> {
    weights: &'a Tensor,
    bias: &'a Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub dx: Tensor,
    pub dweights: Tensor,
    pub dbias: Tensor,
}

impl<'a> DenseLayer<'a> {
    pub fn new(weights: &'a Tensor, bias: &'a Tensor) -> Result<Self> {
        match *weights.shape() {
            [_, out] if bias.shape() == [out] => Ok(Self { weights, bias }),
            _ => Err(Error::shape(format!(
                "dense weights {:?} with bias {:?}",
                weights.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_features(&self) -> usize {
        self.weights.shape()[1]
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != [self.in_features()] {
            return Err(Error::shape(format!(
                "dense input {:?}, expected [{}]",
                x.shape(),
                self.in_features()
            )));
        }
        Ok(())
    }

    /// `y = Wᵀx + b`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let n = self.out_features();
        let mut y = self.bias.data().to_vec();
        for (&xv, wrow) in x.data().iter().zip(self.weights.data().chunks_exact(n)) {
            if xv == 0.0 {
                continue;
            }
            for (o, &w) in y.iter_mut().zip(wrow) {
                *o += xv * w;
            }
        }
        Ok(Tensor::from_raw(vec![n], y))
    }

    pub fn backward(&self, x: &Tensor, dout: &Tensor) -> Result<DenseGrads> {
        self.check_input(x)?;
        let n = self.out_features();
        if dout.shape() != [n] {
            return Err(Error::shape(format!(
                "dense dOut {:?}, expected [{n}]",
                dout.shape()
            )));
        }
        let g = dout.data();
        let dx = self
            .weights
            .data()
            .chunks_exact(n)
            .map(|wrow| wrow.iter().zip(g).map(|(w, g)| w * g).sum())
            .collect();
        let mut dw = Vec::with_capacity(self.weights.len());
        for &xv in x.data() {
            dw.extend(g.iter().map(|&gv| xv * gv));
        }
        Ok(DenseGrads {
            dx: Tensor::from_raw(vec![self.in_features()], dx),
            dweights: Tensor::from_raw(self.weights.shape().to_vec(), dw),
            dbias: dout.clone(),
        })
    }
}
