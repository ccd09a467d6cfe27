//! The train, eval and inspect commands as library calls.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::create_dir;
use crate::model::{tensor_path, Checkpoint, CheckpointMeta, ModelConfig, Network, ParamSpec};
use crate::tensor::peek_shape;
use crate::train::{
    check_compatible, evaluate, load_samples, train_with, DatasetManifest, EpochRecord, EvalReport, Split,
    TrainOutcome,
};

use super::config::RunConfig;

pub const TRAIN_LOG: &str = "train_log.csv";

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub config: ModelConfig,
    pub checkpoint_dir: PathBuf,
    pub log_path: PathBuf,
    pub outcome: TrainOutcome,
}

/// Trains on the `train` split, tracking val macro F1 on the `val` split.
pub fn run_train(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    checkpoint_dir: Option<&Path>,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainRun> {
    let manifest_path = match manifest {
        Some(p) => p.to_path_buf(),
        None => cfg.feature_manifest()?,
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let config = cfg.model.resolve(manifest.grid)?;
    let net = Network::new(&config)?;
    let train_set = load_samples(&manifest, &config, Some(Split::Train))?;
    let val_set = load_samples(&manifest, &config, Some(Split::Val))?;
    let dir = match checkpoint_dir {
        Some(p) => p.to_path_buf(),
        None => cfg.checkpoint_dir()?,
    };
    create_dir(&dir)?;
    let log_path = dir.join(TRAIN_LOG);
    let mut options = cfg.train_options();
    options.checkpoint_dir = Some(dir.clone());
    options.log_path = Some(log_path.clone());
    let outcome = train_with(&net, net.init_params()?, &train_set, &val_set, &options, on_epoch)?;
    Ok(TrainRun {
        config,
        checkpoint_dir: dir,
        log_path,
        outcome,
    })
}

fn describe_mismatch(a: &ModelConfig, b: &ModelConfig) -> String {
    let mut diffs = Vec::new();
    macro_rules! cmp {
        ($($f:ident),*) => {$(
            if a.$f != b.$f {
                diffs.push(format!("{}: config {:?} vs checkpoint {:?}", stringify!($f), a.$f, b.$f));
            }
        )*};
    }
    cmp!(depth, modalities, text_grid, audio_input, dropout, seed, channel_divisor, head_divisor);
    diffs.join("; ")
}

/// Evaluates a checkpoint on the manifest (all records, or one split).
pub fn run_eval(
    cfg: Option<&RunConfig>,
    manifest: &Path,
    checkpoint_dir: &Path,
    split: Option<Split>,
) -> Result<EvalReport> {
    let manifest = DatasetManifest::load(manifest)?;
    let ck = Checkpoint::load(checkpoint_dir)?;
    if let Some(cfg) = cfg {
        let expected = cfg.model.resolve(manifest.grid)?;
        if expected != ck.config {
            return Err(Error::config(format!(
                "run config does not match checkpoint {}: {}",
                checkpoint_dir.display(),
                describe_mismatch(&expected, &ck.config)
            )));
        }
    }
    check_compatible(&manifest, &ck.config)?;
    let net = Network::new(&ck.config)?;
    let samples = load_samples(&manifest, &ck.config, split)?;
    evaluate(&net, &ck.params, &samples)
}

fn shape_str(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("×")
}

/// `name  shape  count` per parameter, then the total.
pub fn format_listing(specs: &[ParamSpec]) -> String {
    let width = specs.iter().map(|s| s.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    let mut total = 0;
    for s in specs {
        let n: usize = s.shape.iter().product();
        total += n;
        out.push_str(&format!("{:<width$}  {:<16}  {n:>10}\n", s.name, shape_str(&s.shape)));
    }
    out.push_str(&format!("total parameters: {total}\n"));
    out
}

/// Lists a checkpoint's parameters after checking every file header
/// against the shapes its config implies.
pub fn run_inspect(checkpoint_dir: &Path) -> Result<String> {
    let meta = CheckpointMeta::read(checkpoint_dir)?;
    let net = Network::new(&meta.config)?;
    meta.check_against(&net, checkpoint_dir)?;
    for spec in net.param_specs() {
        let path = tensor_path(checkpoint_dir, "params", &spec.name);
        let shape = peek_shape(&path)?;
        if shape != spec.shape {
            return Err(Error::shape(format!(
                "{}: shape {:?} but config requires {:?}",
                path.display(),
                shape,
                spec.shape
            )));
        }
    }
    let c = &meta.config;
    let mods: Vec<&str> = c.modalities.iter().map(|m| m.tag()).collect();
    let mut out = format!(
        "depth {}  modalities {}  text grid {}×{}  epoch {}  adam step {}\n",
        c.depth,
        mods.join("+"),
        c.text_grid.lines,
        c.text_grid.words,
        meta.epoch,
        meta.adam_step
    );
    out.push_str(&format_listing(net.param_specs()));
    Ok(out)
}
