#![allow(dead_code)]

pub mod gradcheck;
pub mod synth;

use std::path::{Path, PathBuf};

use moodnet::model::{Modality, ModelConfig, TextGrid};
use moodnet::train::{DatasetManifest, FeatureRecord, MoodCluster, Sample, Split};
use moodnet::{Init, Tensor};

/// The shrunken dual-modality model used by the capacity checks.
pub fn shrunken_config(seed: u64) -> ModelConfig {
    ModelConfig {
        depth: 4,
        modalities: vec![Modality::Audio, Modality::Lyrics],
        text_grid: TextGrid { lines: 8, words: 6 },
        audio_input: [24, 64],
        dropout: 0.2,
        seed,
        channel_divisor: 32,
        head_divisor: 16,
    }
}

/// Random features in both modalities and random labels.
pub fn synthetic_samples(n: usize, config: &ModelConfig, seed: u64) -> Vec<Sample> {
    let [h, w] = config.audio_input;
    let g = config.text_grid;
    let labels = Tensor::create(&[n], Init::Uniform { limit: 2.5, seed: seed ^ 0xABCD }).unwrap();
    (0..n)
        .map(|i| {
            let s = seed.wrapping_mul(1000).wrapping_add(i as u64);
            Sample {
                clip_id: format!("clip{i:03}"),
                audio: Some(Tensor::create(&[h, w, 1], Init::Uniform { limit: 0.5, seed: 2 * s }).unwrap().map(|v| v + 0.5)),
                lyrics: Some(Tensor::create(&[g.lines, g.words, 100], Init::Gaussian { std: 0.4, seed: 2 * s + 1 }).unwrap()),
                label: ((labels.data()[i] + 2.5).floor() as usize).min(4),
            }
        })
        .collect()
}

/// Writes `samples` as feature files plus a manifest; returns the manifest path.
pub fn write_feature_dataset(dir: &Path, samples: &[Sample], grid: TextGrid, split: Split) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let records = samples
        .iter()
        .map(|s| {
            let audio = PathBuf::from(format!("{}.mel.mnt", s.clip_id));
            let lyrics = PathBuf::from(format!("{}.lyr.mnt", s.clip_id));
            s.audio.as_ref().unwrap().save(&dir.join(&audio)).unwrap();
            s.lyrics.as_ref().unwrap().save(&dir.join(&lyrics)).unwrap();
            FeatureRecord {
                clip_id: s.clip_id.clone(),
                audio_feat: audio,
                lyrics_feat: lyrics,
                label: MoodCluster::from_index(s.label).unwrap(),
                split,
            }
        })
        .collect();
    let manifest = DatasetManifest { grid, records, base_dir: dir.to_path_buf() };
    let path = dir.join("features.jsonl");
    manifest.save(&path).unwrap();
    path
}
