//! On-disk checkpoints: a directory holding `checkpoint.json` and one tensor
//! file per parameter and per ADAM moment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{Network, ParamSpec};
use crate::error::{Error, Result};
use crate::fsutil::{create_dir, write_atomic};
use crate::optim::{AdamConfig, AdamState};
use crate::params::ParamSet;
use crate::tensor::Tensor;

const META_FILE: &str = "checkpoint.json";
const FORMAT_VERSION: u32 = 1;
const GROUPS: [&str; 3] = ["params", "adam_m", "adam_v"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format: u32,
    pub config: ModelConfig,
    /// Completed training epochs.
    pub epoch: usize,
    pub adam: AdamConfig,
    pub adam_step: u64,
    pub tensors: Vec<TensorEntry>,
}

impl CheckpointMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: Self = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
        if meta.format != FORMAT_VERSION {
            return Err(Error::format(&path, format!("unsupported checkpoint format {}", meta.format)));
        }
        Ok(meta)
    }

    /// Errors unless the listed tensors are exactly those `net` requires.
    pub fn check_against(&self, net: &Network, dir: &Path) -> Result<()> {
        check_listing(self, net.param_specs(), dir)
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum()
    }
}

/// Model parameters plus optimizer state at an epoch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub epoch: usize,
    pub params: ParamSet,
    pub adam: AdamState,
}

/// `<dir>/<group>/<name>.mnt`, where group is `params`, `adam_m` or `adam_v`.
pub fn tensor_path(dir: &Path, group: &str, name: &str) -> PathBuf {
    dir.join(group).join(format!("{name}.mnt"))
}

impl Checkpoint {
    /// Values pass through `f32` on disk.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let net = Network::new(&self.config)?;
        net.check_params(&self.params)?;
        net.check_params(&self.adam.m)?;
        net.check_params(&self.adam.v)?;
        for (group, set) in GROUPS.iter().zip([&self.params, &self.adam.m, &self.adam.v]) {
            create_dir(&dir.join(group))?;
            for (name, t) in set.iter() {
                t.save(&tensor_path(dir, group, name))?;
            }
        }
        let meta = CheckpointMeta {
            format: FORMAT_VERSION,
            config: self.config.clone(),
            epoch: self.epoch,
            adam: self.adam.config,
            adam_step: self.adam.t,
            tensors: net
                .param_specs()
                .iter()
                .map(|s| TensorEntry {
                    name: s.name.clone(),
                    shape: s.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&meta).expect("checkpoint metadata serializes");
        write_atomic(&dir.join(META_FILE), |w: &mut dyn Write| {
            w.write_all(json.as_bytes())?;
            w.write_all(b"\n")
        })
    }

    /// Fails on any name or shape disagreement between metadata, config and files.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta = CheckpointMeta::read(dir)?;
        let net = Network::new(&meta.config)?;
        check_listing(&meta, net.param_specs(), dir)?;
        let mut sets = Vec::with_capacity(GROUPS.len());
        for group in GROUPS {
            let mut set = ParamSet::new();
            for spec in net.param_specs() {
                let path = tensor_path(dir, group, &spec.name);
                let t = Tensor::load(&path)?;
                if t.shape() != spec.shape.as_slice() {
                    return Err(Error::shape(format!(
                        "{}: shape {:?} but config requires {:?}",
                        path.display(),
                        t.shape(),
                        spec.shape
                    )));
                }
                set.insert(spec.name.clone(), t)?;
            }
            sets.push(set);
        }
        let v = sets.pop().expect("three groups");
        let m = sets.pop().expect("three groups");
        let params = sets.pop().expect("three groups");
        meta.adam.validate()?;
        Ok(Self {
            config: meta.config,
            epoch: meta.epoch,
            params,
            adam: AdamState {
                config: meta.adam,
                m,
                v,
                t: meta.adam_step,
            },
        })
    }
}

fn check_listing(meta: &CheckpointMeta, specs: &[ParamSpec], dir: &Path) -> Result<()> {
    let path = dir.join(META_FILE);
    if meta.tensors.len() != specs.len() {
        return Err(Error::shape(format!(
            "{} lists {} tensors, config requires {}",
            path.display(),
            meta.tensors.len(),
            specs.len()
        )));
    }
    for (entry, spec) in meta.tensors.iter().zip(specs) {
        if entry.name != spec.name || entry.shape != spec.shape {
            return Err(Error::shape(format!(
                "{} lists {} {:?}, config requires {} {:?}",
                path.display(),
                entry.name,
                entry.shape,
                spec.name,
                spec.shape
            )));
        }
    }
    Ok(())
}
