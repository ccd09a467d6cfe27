//! Central finite differences against the hand-written backward passes.
//!
//! Each layer is reduced to a scalar `L = Σ y·r` with a fixed random `r`, so
//! the upstream gradient is `r`.

use moodnet::nn::{self, ConvLayer, DenseLayer, PoolSpec};
use moodnet::optim::{cross_entropy, softmax_ce_grad};
use moodnet::{Init, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|)`, with an absolute floor so exact zeros compare sanely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-7);
    (analytic - numeric).abs() / scale
}

/// Max relative error of `grad` against central differences of `f` at `x`.
pub fn check(f: impl Fn(&Tensor) -> f64, x: &Tensor, grad: &Tensor) -> f64 {
    assert_eq!(x.shape(), grad.shape());
    let mut worst: f64 = 0.0;
    let mut xp = x.clone().into_data();
    for i in 0..xp.len() {
        let orig = xp[i];
        xp[i] = orig + EPS;
        let up = f(&Tensor::new(x.shape(), xp.clone()).unwrap());
        xp[i] = orig - EPS;
        let down = f(&Tensor::new(x.shape(), xp.clone()).unwrap());
        xp[i] = orig;
        let numeric = (up - down) / (2.0 * EPS);
        worst = worst.max(rel_err(grad.data()[i], numeric));
    }
    worst
}

fn project(y: &Tensor, r: &Tensor) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn uniform(shape: &[usize], seed: u64) -> Tensor {
    Tensor::create(shape, Init::Uniform { limit: 1.0, seed }).unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteResult {
    pub layer: &'static str,
    pub instances: usize,
    pub max_rel_err: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.instances >= 20 && self.max_rel_err < TOLERANCE
    }
}

pub fn conv_suite(instances: usize) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for i in 0..instances as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i);
        let (h, w) = (rng.random_range(2..6), rng.random_range(2..6));
        let (cin, cout) = (rng.random_range(1..4), rng.random_range(1..4));
        let k = if i % 4 == 3 { 1 } else { 3 };
        let x = uniform(&[h, w, cin], 10 * i);
        let kernel = uniform(&[k, k, cin, cout], 10 * i + 1);
        let bias = uniform(&[cout], 10 * i + 2);
        let r = uniform(&[h, w, cout], 10 * i + 3);
        let layer = ConvLayer::new(&kernel, &bias).unwrap();
        let g = layer.backward(&x, &r).unwrap();
        worst = worst.max(check(
            |x| project(&ConvLayer::new(&kernel, &bias).unwrap().forward(x).unwrap(), &r),
            &x,
            &g.dx,
        ));
        worst = worst.max(check(
            |k| project(&ConvLayer::new(k, &bias).unwrap().forward(&x).unwrap(), &r),
            &kernel,
            &g.dkernel,
        ));
        worst = worst.max(check(
            |b| project(&ConvLayer::new(&kernel, b).unwrap().forward(&x).unwrap(), &r),
            &bias,
            &g.dbias,
        ));
    }
    SuiteResult { layer: "conv2d", instances, max_rel_err: worst }
}

/// Smallest gap between a window's max and its runner-up; ties are kinks.
fn min_window_gap(x: &Tensor, spec: PoolSpec) -> f64 {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = spec.output_extent(h, w).unwrap();
    let mut gap = f64::INFINITY;
    for oi in 0..oh {
        for oj in 0..ow {
            for ch in 0..c {
                let mut vals: Vec<f64> = (0..spec.ph)
                    .flat_map(|a| (0..spec.pw).map(move |b| (a, b)))
                    .map(|(a, b)| x.at(&[oi * spec.ph + a, oj * spec.pw + b, ch]))
                    .collect();
                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                if vals.len() > 1 {
                    gap = gap.min(vals[0] - vals[1]);
                }
            }
        }
    }
    gap
}

pub fn maxpool_suite(instances: usize) -> SuiteResult {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut seed = 0u64;
    while done < instances {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let spec = PoolSpec::new(rng.random_range(1..4), rng.random_range(1..5));
        let h = spec.ph * rng.random_range(1..4) + rng.random_range(0..spec.ph);
        let w = spec.pw * rng.random_range(1..3) + rng.random_range(0..spec.pw);
        let c = rng.random_range(1..4);
        let x = uniform(&[h, w, c], 20 * seed);
        if min_window_gap(&x, spec) < 1e-3 {
            continue;
        }
        let y = nn::maxpool2d_forward(&x, spec).unwrap();
        let r = uniform(y.shape(), 20 * seed + 1);
        let dx = nn::maxpool2d_backward(&x, spec, &r).unwrap();
        worst = worst.max(check(|x| project(&nn::maxpool2d_forward(x, spec).unwrap(), &r), &x, &dx));
        done += 1;
    }
    SuiteResult { layer: "maxpool", instances, max_rel_err: worst }
}

pub fn relu_suite(instances: usize) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for i in 0..instances as u64 {
        // keep every input at least 1e-3 away from the kink at zero
        let x = uniform(&[3, 4, 2], 30 * i).map(|v| if v.abs() < 1e-3 { v.signum() * 1e-3 + v } else { v });
        let r = uniform(&[3, 4, 2], 30 * i + 1);
        let dx = nn::relu_backward(&x, &r).unwrap();
        worst = worst.max(check(|x| project(&nn::relu(x), &r), &x, &dx));
    }
    SuiteResult { layer: "relu", instances, max_rel_err: worst }
}

pub fn dense_suite(instances: usize) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for i in 0..instances as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + i);
        let (n_in, n_out) = (rng.random_range(1..9), rng.random_range(1..7));
        let x = uniform(&[n_in], 40 * i);
        let wt = uniform(&[n_in, n_out], 40 * i + 1);
        let b = uniform(&[n_out], 40 * i + 2);
        let r = uniform(&[n_out], 40 * i + 3);
        let g = DenseLayer::new(&wt, &b).unwrap().backward(&x, &r).unwrap();
        let fwd = |x: &Tensor, wt: &Tensor, b: &Tensor| project(&DenseLayer::new(wt, b).unwrap().forward(x).unwrap(), &r);
        worst = worst.max(check(|x| fwd(x, &wt, &b), &x, &g.dx));
        worst = worst.max(check(|w| fwd(&x, w, &b), &wt, &g.dweights));
        worst = worst.max(check(|b| fwd(&x, &wt, b), &b, &g.dbias));
    }
    SuiteResult { layer: "dense", instances, max_rel_err: worst }
}

pub fn softmax_ce_suite(instances: usize) -> SuiteResult {
    let mut worst: f64 = 0.0;
    for i in 0..instances as u64 {
        let z = Tensor::create(&[5], Init::Gaussian { std: 2.0, seed: 50 * i }).unwrap();
        let label = (i % 5) as usize;
        let g = softmax_ce_grad(&z, label).unwrap();
        worst = worst.max(check(|z| cross_entropy(&nn::softmax(z), label).unwrap(), &z, &g));
    }
    SuiteResult { layer: "softmax+ce", instances, max_rel_err: worst }
}

pub fn all_suites(instances: usize) -> Vec<SuiteResult> {
    vec![
        conv_suite(instances),
        maxpool_suite(instances),
        relu_suite(instances),
        dense_suite(instances),
        softmax_ce_suite(instances),
    ]
}
