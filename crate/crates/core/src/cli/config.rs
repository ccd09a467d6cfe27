//! TOML run configuration shared by every command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{N_FRAMES, N_MELS};
use crate::error::{Error, Result};
use crate::model::{Modality, ModelConfig, TextGrid, NUM_CLASSES};
use crate::optim::AdamConfig;
use crate::train::{Precision, TrainOptions};

/// Environment variable that overrides `paths.cache_dir`.
pub const CACHE_ENV: &str = "MOODNET_CACHE";

/// Name of the feature manifest written into the cache directory.
pub const FEATURE_MANIFEST: &str = "features.jsonl";

fn default_audio_input() -> [usize; 2] {
    [N_MELS, N_FRAMES]
}

fn default_dropout() -> f64 {
    0.2
}

fn default_classes() -> usize {
    NUM_CLASSES
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub depth: usize,
    pub modalities: Vec<Modality>,
    pub seed: u64,
    /// Fixes the lyrics grid. When absent, featurize uses the corpus maxima.
    #[serde(default)]
    pub text_grid: Option<TextGrid>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_audio_input")]
    pub audio_input: [usize; 2],
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "one")]
    pub channel_divisor: usize,
    #[serde(default = "one")]
    pub head_divisor: usize,
}

impl ModelSection {
    /// The model config for a dataset whose lyrics grid is `grid`.
    pub fn resolve(&self, grid: TextGrid) -> Result<ModelConfig> {
        if self.classes != NUM_CLASSES {
            return Err(Error::config(format!(
                "classes = {} but the label set has {NUM_CLASSES} clusters",
                self.classes
            )));
        }
        if let Some(g) = self.text_grid {
            if g != grid {
                return Err(Error::config(format!(
                    "config text_grid {}×{} does not match dataset grid {}×{}",
                    g.lines, g.words, grid.lines, grid.words
                )));
            }
        }
        let cfg = ModelConfig {
            depth: self.depth,
            modalities: self.modalities.clone(),
            text_grid: grid,
            audio_input: self.audio_input,
            dropout: self.dropout,
            seed: self.seed,
            channel_divisor: self.channel_divisor,
            head_divisor: self.head_divisor,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Default for OptimSection {
    fn default() -> Self {
        let a = AdamConfig::default();
        Self {
            learning_rate: a.learning_rate,
            beta1: a.beta1,
            beta2: a.beta2,
            epsilon: a.epsilon,
            batch_size: 16,
            epochs: 50,
        }
    }
}

impl OptimSection {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub embeddings: Option<PathBuf>,
    /// JSON lines of `{clip_id, audio, lyrics, label, split}` pointing at WAV and text files.
    pub raw_manifest: Option<PathBuf>,
    /// Feature manifest; defaults to `features.jsonl` inside the cache dir.
    pub manifest: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub optim: OptimSection,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub precision: Precision,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        cfg.base_dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(cfg)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
        cfg.optim.adam().validate()?;
        if cfg.optim.batch_size == 0 {
            return Err(Error::config("optim.batch_size must be >= 1"));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn required(&self, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::config(format!("paths.{key} is not set")))
    }

    pub fn embeddings(&self) -> Result<PathBuf> {
        self.required(&self.paths.embeddings, "embeddings")
    }

    pub fn raw_manifest(&self) -> Result<PathBuf> {
        self.required(&self.paths.raw_manifest, "raw_manifest")
    }

    /// `MOODNET_CACHE` wins over `paths.cache_dir`.
    pub fn cache_dir(&self) -> Result<PathBuf> {
        match std::env::var_os(CACHE_ENV) {
            Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
            _ => self.required(&self.paths.cache_dir, "cache_dir"),
        }
    }

    pub fn feature_manifest(&self) -> Result<PathBuf> {
        match &self.paths.manifest {
            Some(p) => Ok(self.resolve(p)),
            None => Ok(self.cache_dir()?.join(FEATURE_MANIFEST)),
        }
    }

    pub fn checkpoint_dir(&self) -> Result<PathBuf> {
        self.required(&self.paths.checkpoint_dir, "checkpoint_dir")
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            adam: self.optim.adam(),
            batch_size: self.optim.batch_size,
            epochs: self.optim.epochs,
            precision: self.precision,
            checkpoint_dir: None,
            log_path: None,
        }
    }
}
