//! Minibatch ADAM training and evaluation over in-memory samples.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use super::metrics::{ConfusionMatrix, EvalReport};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, Network, RunMode};
use crate::optim::{AdamConfig, AdamState};
use crate::params::ParamSet;
use crate::seed;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// All arithmetic in `f64`.
    #[default]
    Double,
    /// Parameters rounded to `f32` after every update.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub precision: Precision,
    /// Written after every epoch, and once before the first.
    pub checkpoint_dir: Option<PathBuf>,
    /// CSV `epoch,loss,val_macro_f1`.
    pub log_path: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: 16,
            epochs: 50,
            precision: Precision::Double,
            checkpoint_dir: None,
            log_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Zero-based.
    pub epoch: usize,
    /// Mean per-sample training loss, each measured before its batch's update.
    pub loss: f64,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochRecord>,
}

/// Visit order of the training set in `epoch`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[SHUFFLE_STREAM, epoch as u64]));
    order.shuffle(&mut rng);
    order
}

/// Dropout stream for sample `index` (position in the training set) in `epoch`.
pub fn dropout_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    seed::derive(seed, &[DROPOUT_STREAM, epoch as u64, index as u64])
}

fn log_line(file: &mut File, path: &Path, rec: &EpochRecord) -> Result<()> {
    let f1 = rec.val_macro_f1.map(|v| format!("{v:.6}")).unwrap_or_default();
    writeln!(file, "{},{:.6},{}", rec.epoch, rec.loss, f1).map_err(|e| Error::io(path, e))
}

/// Trains from `params` (typically `net.init_params()`).
pub fn train(
    net: &Network,
    params: ParamSet,
    train_set: &[Sample],
    val_set: &[Sample],
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    train_with(net, params, train_set, val_set, options, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    net: &Network,
    mut params: ParamSet,
    train_set: &[Sample],
    val_set: &[Sample],
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    if options.batch_size == 0 {
        return Err(Error::config("batch_size must be >= 1"));
    }
    options.adam.validate()?;
    net.check_params(&params)?;
    if train_set.is_empty() && options.epochs > 0 {
        return Err(Error::input("training set is empty"));
    }
    let seed = net.config().seed;
    if options.precision == Precision::Single {
        round_params(&mut params);
    }
    let mut ck = Checkpoint {
        config: net.config().clone(),
        epoch: 0,
        adam: AdamState::new(&params, options.adam),
        params,
    };
    let mut log = match &options.log_path {
        Some(p) => {
            let mut f = OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?;
            writeln!(f, "epoch,loss,val_macro_f1").map_err(|e| Error::io(p, e))?;
            Some((f, p.clone()))
        }
        None => None,
    };
    if let Some(dir) = &options.checkpoint_dir {
        ck.save(dir)?;
    }

    let mut history = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        let order = epoch_order(seed, epoch, train_set.len());
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(options.batch_size).enumerate() {
            let results: Vec<Result<(f64, ParamSet)>> = batch
                .par_iter()
                .map(|&i| {
                    let s = &train_set[i];
                    net.loss_and_grad(&ck.params, s.inputs(), s.label, dropout_seed(seed, epoch, i))
                })
                .collect();
            let mut grads = ck.params.zeros_like();
            let mut batch_loss = 0.0;
            // fixed-order reduction keeps the sum independent of thread count
            for r in results {
                let (loss, g) = r?;
                batch_loss += loss;
                grads.accumulate(&g)?;
            }
            let clips = || {
                let ids: Vec<&str> = batch.iter().map(|&i| train_set[i].clip_id.as_str()).collect();
                ids.join(", ")
            };
            if !batch_loss.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite loss in epoch {epoch} batch {b} (clips {})",
                    clips()
                )));
            }
            grads.scale(1.0 / batch.len() as f64);
            ck.adam.step(&mut ck.params, &grads).map_err(|e| match e {
                Error::Training(msg) => {
                    Error::Training(format!("epoch {epoch} batch {b} (clips {}): {msg}", clips()))
                }
                other => other,
            })?;
            if options.precision == Precision::Single {
                round_params(&mut ck.params);
            }
            loss_sum += batch_loss;
        }
        ck.epoch = epoch + 1;
        let val_macro_f1 = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(net, &ck.params, val_set)?.macro_f1())
        };
        let rec = EpochRecord {
            epoch,
            loss: loss_sum / train_set.len() as f64,
            val_macro_f1,
        };
        if let Some((f, p)) = log.as_mut() {
            log_line(f, p, &rec)?;
        }
        if let Some(dir) = &options.checkpoint_dir {
            ck.save(dir)?;
        }
        on_epoch(&rec);
        history.push(rec);
    }
    Ok(TrainOutcome {
        checkpoint: ck,
        history,
    })
}

fn round_params(params: &mut ParamSet) {
    params.iter_mut().for_each(|(_, t)| *t = t.round_to_f32());
}

/// Eval-mode argmax per sample, ties to the lowest class.
pub fn predict(net: &Network, params: &ParamSet, samples: &[Sample]) -> Result<Vec<usize>> {
    samples
        .par_iter()
        .map(|s| Ok(net.forward(params, s.inputs(), RunMode::Eval)?.predicted()))
        .collect()
}

pub fn evaluate(net: &Network, params: &ParamSet, samples: &[Sample]) -> Result<EvalReport> {
    let preds = predict(net, params, samples)?;
    let cm = ConfusionMatrix::from_pairs(samples.iter().map(|s| s.label).zip(preds))?;
    Ok(EvalReport::from_confusion(cm))
}
