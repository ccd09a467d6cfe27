//! Same-padded 2D cross-correlation over `[h×w×c]` feature maps.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Borrowed view of a convolution's parameters.
///
/// `kernel` is `[kh×kw×cin×cout]` with odd `kh`, `kw`; `bias` is `[cout]`.
#[derive(Debug, Clone, Copy)]
pub struct ConvLayer<'a> {
    kernel: &'a Tensor,
    bias: &'a Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub dx: Tensor,
    pub dkernel: Tensor,
    pub dbias: Tensor,
}

impl<'a> ConvLayer<'a> {
    pub fn new(kernel: &'a Tensor, bias: &'a Tensor) -> Result<Self> {
        let ks = kernel.shape();
        if ks.len() != 4 {
            return Err(Error::shape(format!("conv kernel must be rank 4, got {ks:?}")));
        }
        if ks[0].is_multiple_of(2) || ks[1].is_multiple_of(2) {
            return Err(Error::shape(format!("conv kernel extents must be odd, got {ks:?}")));
        }
        if bias.shape() != [ks[3]] {
            return Err(Error::shape(format!(
                "conv bias {:?} does not match kernel {ks:?}",
                bias.shape()
            )));
        }
        Ok(Self { kernel, bias })
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[3]
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize, usize)> {
        match *x.shape() {
            [h, w, c] if c == self.in_channels() => Ok((h, w, c)),
            _ => Err(Error::shape(format!(
                "conv input {:?} does not match {} input channels",
                x.shape(),
                self.in_channels()
            ))),
        }
    }

    /// Yields `(i, j, di, dj, ii, jj)` for every in-bounds tap.
    fn taps(
        &self,
        h: usize,
        w: usize,
    ) -> impl Iterator<Item = (usize, usize, usize, usize, usize, usize)> + '_ {
        let (kh, kw) = (self.kernel.shape()[0], self.kernel.shape()[1]);
        let (ph, pw) = (kh / 2, kw / 2);
        (0..h).flat_map(move |i| {
            (0..w).flat_map(move |j| {
                (0..kh).flat_map(move |di| {
                    (0..kw).filter_map(move |dj| {
                        let ii = (i + di).checked_sub(ph).filter(|&v| v < h)?;
                        let jj = (j + dj).checked_sub(pw).filter(|&v| v < w)?;
                        Some((i, j, di, dj, ii, jj))
                    })
                })
            })
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (h, w, cin) = self.check_input(x)?;
        let cout = self.out_channels();
        let kw = self.kernel.shape()[1];
        let (xd, kd, bd) = (x.data(), self.kernel.data(), self.bias.data());

        let mut out = vec![0.0; h * w * cout];
        for cell in out.chunks_exact_mut(cout) {
            cell.copy_from_slice(bd);
        }
        for (i, j, di, dj, ii, jj) in self.taps(h, w) {
            let orow = &mut out[(i * w + j) * cout..(i * w + j + 1) * cout];
            let xs = &xd[(ii * w + jj) * cin..(ii * w + jj + 1) * cin];
            let kbase = (di * kw + dj) * cin * cout;
            for (c, &xv) in xs.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let krow = &kd[kbase + c * cout..kbase + (c + 1) * cout];
                for (o, &kv) in orow.iter_mut().zip(krow) {
                    *o += xv * kv;
                }
            }
        }
        Ok(Tensor::from_raw(vec![h, w, cout], out))
    }

    pub fn backward(&self, x: &Tensor, dout: &Tensor) -> Result<ConvGrads> {
        let (h, w, cin) = self.check_input(x)?;
        let cout = self.out_channels();
        if dout.shape() != [h, w, cout] {
            return Err(Error::shape(format!(
                "conv dOut {:?}, expected {:?}",
                dout.shape(),
                [h, w, cout]
            )));
        }
        let kw = self.kernel.shape()[1];
        let (xd, kd, gd) = (x.data(), self.kernel.data(), dout.data());

        let mut dx = vec![0.0; xd.len()];
        let mut dk = vec![0.0; kd.len()];
        let mut db = vec![0.0; cout];
        for g in gd.chunks_exact(cout) {
            for (b, &v) in db.iter_mut().zip(g) {
                *b += v;
            }
        }
        for (i, j, di, dj, ii, jj) in self.taps(h, w) {
            let g = &gd[(i * w + j) * cout..(i * w + j + 1) * cout];
            let xbase = (ii * w + jj) * cin;
            let kbase = (di * kw + dj) * cin * cout;
            for c in 0..cin {
                let krow = &kd[kbase + c * cout..kbase + (c + 1) * cout];
                let mut acc = 0.0;
                for (&kv, &gv) in krow.iter().zip(g) {
                    acc += kv * gv;
                }
                dx[xbase + c] += acc;

                let xv = xd[xbase + c];
                if xv != 0.0 {
                    let dkrow = &mut dk[kbase + c * cout..kbase + (c + 1) * cout];
                    for (d, &gv) in dkrow.iter_mut().zip(g) {
                        *d += xv * gv;
                    }
                }
            }
        }
        Ok(ConvGrads {
            dx: Tensor::from_raw(x.shape().to_vec(), dx),
            dkernel: Tensor::from_raw(self.kernel.shape().to_vec(), dk),
            dbias: Tensor::from_raw(vec![cout], db),
        })
    }
}
