//! Categorical cross-entropy and the ADAM update rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::params::ParamSet;
use crate::tensor::Tensor;

/// Probability floor applied before taking the log.
pub const PROB_CLIP: f64 = 1e-12;

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::Label { label, classes });
    }
    Ok(())
}

/// `-ln(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &Tensor, label: usize) -> Result<f64> {
    check_label(label, probs.len())?;
    Ok(-probs.data()[label].max(PROB_CLIP).ln())
}

/// Gradient of `cross_entropy(softmax(logits), label)` w.r.t. the logits.
pub fn softmax_ce_grad(logits: &Tensor, label: usize) -> Result<Tensor> {
    check_label(label, logits.len())?;
    let mut g = softmax(logits);
    g.data_mut()[label] -= 1.0;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid ADAM hyperparameters {self:?}")))
        }
    }
}

/// First and second moments mirroring the parameter set, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: ParamSet,
    pub v: ParamSet,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One ADAM update. Non-finite gradients abort before anything changes.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_congruent(grads)?;
        params.check_congruent(&self.m)?;
        if !grads.all_finite() {
            let bad = grads
                .iter()
                .find(|(_, g)| !g.is_finite())
                .map(|(n, _)| n)
                .unwrap_or("?");
            return Err(Error::Training(format!(
                "non-finite gradient in {bad}; parameters left unchanged"
            )));
        }
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);

        let moments = self.m.iter_mut().zip(self.v.iter_mut());
        for (((_, theta), (_, g)), ((_, m), (_, v))) in params.iter_mut().zip(grads.iter()).zip(moments) {
            let (theta, m, v) = (theta.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..theta.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
