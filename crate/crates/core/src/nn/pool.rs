//! Non-overlapping max pooling with floor semantics, plus the zero padding
//! applied ahead of a pool whose window is larger than its input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pool window; the stride equals the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub ph: usize,
    pub pw: usize,
}

impl PoolSpec {
    pub const fn new(ph: usize, pw: usize) -> Self {
        Self { ph, pw }
    }

    /// Output spatial extents for an `h×w` input, or `None` if either is zero.
    pub fn output_extent(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if self.ph == 0 || self.pw == 0 {
            return None;
        }
        let (oh, ow) = (h / self.ph, w / self.pw);
        (oh > 0 && ow > 0).then_some((oh, ow))
    }
}

fn dims(x: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::shape(format!("{what} expects [h×w×c], got {:?}", x.shape()))),
    }
}

/// Flat input index of the window maximum for every output cell, ties to the
/// first position in row-major window order.
fn argmax_cells(x: &Tensor, spec: PoolSpec) -> Result<(Vec<usize>, [usize; 3])> {
    let (h, w, c) = dims(x, "maxpool")?;
    let (oh, ow) = spec.output_extent(h, w).ok_or_else(|| {
        Error::shape(format!(
            "pool ({}, {}) on {h}×{w} leaves an empty output",
            spec.ph, spec.pw
        ))
    })?;
    let xd = x.data();
    let mut idx = Vec::with_capacity(oh * ow * c);
    for oi in 0..oh {
        for oj in 0..ow {
            for ch in 0..c {
                let mut best = (oi * spec.ph * w + oj * spec.pw) * c + ch;
                for di in 0..spec.ph {
                    for dj in 0..spec.pw {
                        let p = ((oi * spec.ph + di) * w + oj * spec.pw + dj) * c + ch;
                        if xd[p] > xd[best] {
                            best = p;
                        }
                    }
                }
                idx.push(best);
            }
        }
    }
    Ok((idx, [oh, ow, c]))
}

pub fn maxpool2d_forward(x: &Tensor, spec: PoolSpec) -> Result<Tensor> {
    let (idx, shape) = argmax_cells(x, spec)?;
    let xd = x.data();
    Ok(Tensor::from_raw(
        shape.to_vec(),
        idx.into_iter().map(|p| xd[p]).collect(),
    ))
}

pub fn maxpool2d_backward(x: &Tensor, spec: PoolSpec, dout: &Tensor) -> Result<Tensor> {
    let (idx, shape) = argmax_cells(x, spec)?;
    if dout.shape() != shape {
        return Err(Error::shape(format!(
            "maxpool dOut {:?}, expected {shape:?}",
            dout.shape()
        )));
    }
    let mut dx = vec![0.0; x.len()];
    for (p, &g) in idx.into_iter().zip(dout.data()) {
        dx[p] += g;
    }
    Ok(Tensor::from_raw(x.shape().to_vec(), dx))
}

/// Zero-pads the bottom and right edges so the spatial extents reach at
/// least `min_h × min_w`. A no-op copy when they already do.
pub fn pad_to(x: &Tensor, min_h: usize, min_w: usize) -> Result<Tensor> {
    let (h, w, c) = dims(x, "pad")?;
    let (nh, nw) = (h.max(min_h), w.max(min_w));
    if (nh, nw) == (h, w) {
        return Ok(x.clone());
    }
    let mut out = vec![0.0; nh * nw * c];
    for i in 0..h {
        out[i * nw * c..(i * nw + w) * c].copy_from_slice(&x.data()[i * w * c..(i + 1) * w * c]);
    }
    Ok(Tensor::from_raw(vec![nh, nw, c], out))
}

/// Gradient of [`pad_to`]: crops `dout` back to the original `h×w`.
pub fn pad_to_backward(x: &Tensor, dout: &Tensor) -> Result<Tensor> {
    let (h, w, c) = dims(x, "pad")?;
    let (nh, nw, nc) = dims(dout, "pad")?;
    if nh < h || nw < w || nc != c {
        return Err(Error::shape(format!(
            "pad dOut {:?} cannot crop to {:?}",
            dout.shape(),
            x.shape()
        )));
    }
    let mut dx = Vec::with_capacity(h * w * c);
    for i in 0..h {
        dx.extend_from_slice(&dout.data()[i * nw * c..(i * nw + w) * c]);
    }
    Ok(Tensor::from_raw(x.shape().to_vec(), dx))
}
