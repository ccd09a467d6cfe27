use serde::{Deserialize, Serialize};

use crate::audio::{N_FRAMES, N_MELS};
use crate::error::{Error, Result};
use crate::nn::PoolSpec;

/// Number of mood clusters.
pub const NUM_CLASSES: usize = 5;

/// Width of each tower's output vector at full scale.
pub const TOWER_OUTPUT: usize = 2048;

/// Dense widths of the fusion head before the class layer.
pub const HEAD_WIDTHS: [usize; 4] = [2048, 1024, 512, 256];

/// `(conv channels, pool window)` per block of the audio tower.
pub const AUDIO_BLOCKS: [(usize, PoolSpec); 5] = [
    (128, PoolSpec::new(2, 4)),
    (256, PoolSpec::new(2, 4)),
    (512, PoolSpec::new(2, 4)),
    (1024, PoolSpec::new(3, 5)),
    (2048, PoolSpec::new(4, 4)),
];

/// The text tower uses the audio channel schedule with its own pools.
pub const TEXT_BLOCKS: [(usize, PoolSpec); 5] = [
    (128, PoolSpec::new(2, 2)),
    (256, PoolSpec::new(2, 2)),
    (512, PoolSpec::new(2, 2)),
    (1024, PoolSpec::new(3, 2)),
    (2048, PoolSpec::new(4, 2)),
];

pub const MIN_TEXT_EXTENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Lyrics,
}

impl Modality {
    pub fn tag(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Lyrics => "text",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextGrid {
    pub lines: usize,
    pub words: usize,
}

fn default_audio_input() -> [usize; 2] {
    [N_MELS, N_FRAMES]
}

fn default_dropout() -> f64 {
    0.2
}

fn one() -> usize {
    1
}

/// Architecture of one MoodNet variant. Parameter shapes are a function of
/// this struct alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Convolutional blocks per tower: 3, 4 or 5.
    pub depth: usize,
    pub modalities: Vec<Modality>,
    pub text_grid: TextGrid,
    /// Spectrogram `[mel bands, frames]`.
    #[serde(default = "default_audio_input")]
    pub audio_input: [usize; 2],
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    pub seed: u64,
    /// Divides every tower channel count (and the tower output width).
    #[serde(default = "one")]
    pub channel_divisor: usize,
    /// Divides every hidden width of the fusion head.
    #[serde(default = "one")]
    pub head_divisor: usize,
}

impl ModelConfig {
    /// Full-size dual-modality configuration.
    pub fn new(depth: usize, text_grid: TextGrid, seed: u64) -> Self {
        Self {
            depth,
            modalities: vec![Modality::Audio, Modality::Lyrics],
            text_grid,
            audio_input: default_audio_input(),
            dropout: default_dropout(),
            seed,
            channel_divisor: 1,
            head_divisor: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=5).contains(&self.depth) {
            return Err(Error::config(format!("depth must be 3, 4 or 5, got {}", self.depth)));
        }
        if self.modalities.is_empty() {
            return Err(Error::config("modality set is empty"));
        }
        let mut sorted = self.modalities.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != self.modalities {
            return Err(Error::config(format!(
                "modalities must be distinct and listed audio before lyrics, got {:?}",
                self.modalities
            )));
        }
        if self.has(Modality::Lyrics)
            && (self.text_grid.lines < MIN_TEXT_EXTENT || self.text_grid.words < MIN_TEXT_EXTENT)
        {
            return Err(Error::config(format!(
                "text grid {}×{} below the {MIN_TEXT_EXTENT}×{MIN_TEXT_EXTENT} minimum",
                self.text_grid.lines, self.text_grid.words
            )));
        }
        if self.audio_input.contains(&0) {
            return Err(Error::config("audio input extents must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.channel_divisor == 0 || self.head_divisor == 0 {
            return Err(Error::config("width divisors must be >= 1"));
        }
        Ok(())
    }

    pub fn has(&self, m: Modality) -> bool {
        self.modalities.contains(&m)
    }

    pub fn scaled_channels(&self, full: usize) -> usize {
        (full / self.channel_divisor).max(1)
    }

    pub fn tower_output(&self) -> usize {
        self.scaled_channels(TOWER_OUTPUT)
    }

    pub fn head_widths(&self) -> Vec<usize> {
        HEAD_WIDTHS
            .iter()
            .map(|&w| (w / self.head_divisor).max(1))
            .collect()
    }

    pub fn fusion_width(&self) -> usize {
        self.tower_output() * self.modalities.len()
    }
}
