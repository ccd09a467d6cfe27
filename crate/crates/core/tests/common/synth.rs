//! Synthetic raw corpus: tone WAVs, word-list lyrics and a small embedding
//! table, all class-dependent so a model has something to learn.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use moodnet::audio::{AudioClip, CLIP_SAMPLES, SAMPLE_RATE};
use moodnet::cli::{write_raw_manifest, RawRecord};
use moodnet::train::{MoodCluster, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WORDS_PER_CLASS: usize = 4;

fn word(class: usize, k: usize) -> String {
    format!("mood{class}word{k}")
}

pub struct Corpus {
    pub raw_manifest: PathBuf,
    pub embeddings: PathBuf,
    pub records: Vec<RawRecord>,
}

/// `per_class` clips for each of the five clusters; every fifth round of
/// five (one clip per cluster) goes to `val`.
pub fn write_corpus(dir: &Path, per_class: usize, seed: u64) -> Corpus {
    fs::create_dir_all(dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut emb = String::new();
    for class in 0..5 {
        for k in 0..WORDS_PER_CLASS {
            let vals: Vec<String> = (0..100)
                .map(|d| {
                    let signal = if d % 5 == class { 0.8 } else { 0.0 };
                    format!("{:.5}", signal + rng.random_range(-0.2..0.2))
                })
                .collect();
            writeln!(emb, "{} {}", word(class, k), vals.join(" ")).unwrap();
        }
    }
    writeln!(emb, "the {}", vec!["0.01"; 100].join(" ")).unwrap();
    let embeddings = dir.join("embeddings.txt");
    fs::write(&embeddings, emb).unwrap();

    let mut records = Vec::new();
    for i in 0..per_class * 5 {
        let class = i % 5;
        let id = format!("song{i:03}");
        let freq = 250.0 * (class + 1) as f64;
        let n = if i % 3 == 0 { CLIP_SAMPLES } else { CLIP_SAMPLES / 2 };
        let samples = (0..n)
            .map(|t| {
                let ph = 2.0 * std::f64::consts::PI * freq * t as f64 / SAMPLE_RATE as f64;
                0.4 * ph.sin() + rng.random_range(-0.05..0.05)
            })
            .collect();
        let wav = PathBuf::from(format!("{id}.wav"));
        AudioClip::new(samples, SAMPLE_RATE).write_wav(&dir.join(&wav)).unwrap();

        let n_lines = 2 + (i * 7 + 3) % 6;
        let mut text = String::new();
        for l in 0..n_lines {
            let n_words = 2 + (i + l) % 5;
            let line: Vec<String> = (0..n_words)
                .map(|w| if w == 0 { "The".to_string() } else { word(class, rng.random_range(0..WORDS_PER_CLASS)) })
                .collect();
            writeln!(text, "{}!", line.join(" ")).unwrap();
        }
        let lyrics = PathBuf::from(format!("{id}.txt"));
        fs::write(dir.join(&lyrics), text).unwrap();

        records.push(RawRecord {
            clip_id: id,
            audio: wav,
            lyrics,
            label: MoodCluster::from_index(class).unwrap(),
            split: if (i / 5) % 5 == 4 { Split::Val } else { Split::Train },
        });
    }
    let raw_manifest = dir.join("raw.jsonl");
    write_raw_manifest(&raw_manifest, &records).unwrap();
    Corpus { raw_manifest, embeddings, records }
}

/// A run config for the synthetic corpus with shrunken widths.
pub fn run_config_toml(modalities: &[&str], depth: usize, epochs: usize, seed: u64, paths: &str) -> String {
    let mods: Vec<String> = modalities.iter().map(|m| format!("\"{m}\"")).collect();
    format!(
        r#"precision = "double"

[model]
depth = {depth}
modalities = [{}]
seed = {seed}
channel_divisor = 32
head_divisor = 16

[optim]
learning_rate = 0.001
batch_size = 8
epochs = {epochs}

[paths]
{paths}
"#,
        mods.join(", ")
    )
}
