//! Raw assets (WAV + lyrics text) to cached feature tensors and a feature
//! manifest. Up-to-date cache entries are detected by content hash.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{featurize_wav, MelFilterbank};
use crate::error::{Error, Result};
use crate::fsutil::{create_dir, write_atomic};
use crate::model::{TextGrid, MIN_TEXT_EXTENT};
use crate::text::{build_lyrics_tensor, grid_extent, tokenize, EmbeddingTable};
use crate::train::{DatasetManifest, FeatureRecord, MoodCluster, Split};

use super::config::FEATURE_MANIFEST;

/// Bump when feature extraction changes so stale caches are rebuilt.
const FEATURE_VERSION: &str = "moodnet-features-1";
const CACHE_INDEX: &str = "cache_index.json";
pub const FAILURES_FILE: &str = "failures.json";

/// One line of the raw-asset manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub clip_id: String,
    /// Mono 16-bit PCM WAV.
    pub audio: PathBuf,
    /// UTF-8 text, one lyric line per line.
    pub lyrics: PathBuf,
    pub label: MoodCluster,
    pub split: Split,
}

pub fn read_raw_manifest(path: &Path) -> Result<(Vec<RawRecord>, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RawRecord =
            serde_json::from_str(line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        if !seen.insert(r.clip_id.clone()) {
            return Err(Error::format(path, format!("line {}: duplicate clip_id {}", i + 1, r.clip_id)));
        }
        out.push(r);
    }
    Ok((out, base))
}

pub fn write_raw_manifest(path: &Path, records: &[RawRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    write_atomic(path, |w: &mut dyn Write| w.write_all(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct FeaturizeOptions {
    pub raw_manifest: PathBuf,
    pub embeddings: PathBuf,
    pub out_dir: PathBuf,
    /// Fixed lyrics grid; `None` derives it from the corpus.
    pub grid: Option<TextGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordFailure {
    pub clip_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturizeSummary {
    pub manifest_path: PathBuf,
    pub grid: TextGrid,
    pub records: usize,
    /// Feature files written in this run.
    pub written: usize,
    /// Records whose cached features were already current.
    pub skipped: usize,
    pub failures: Vec<RecordFailure>,
}

fn sha256_file(path: &Path) -> Result<[u8; 32]> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).into())
}

fn check_clip_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::input(format!("clip_id {id:?} is not usable as a file name")))
    }
}

struct Prepared {
    tokens: Vec<Vec<String>>,
    audio_hash: [u8; 32],
    lyrics_hash: [u8; 32],
}

fn prepare(r: &RawRecord, base: &Path) -> Result<Prepared> {
    check_clip_id(&r.clip_id)?;
    let lyrics_path = base.join(&r.lyrics);
    let text = fs::read_to_string(&lyrics_path).map_err(|e| Error::io(&lyrics_path, e))?;
    Ok(Prepared {
        tokens: tokenize(&text),
        audio_hash: sha256_file(&base.join(&r.audio))?,
        lyrics_hash: Sha256::digest(text.as_bytes()).into(),
    })
}

fn cache_key(p: &Prepared, grid: TextGrid, embeddings_hash: &[u8; 32]) -> String {
    let mut h = Sha256::new();
    h.update(FEATURE_VERSION.as_bytes());
    h.update(p.audio_hash);
    h.update(p.lyrics_hash);
    h.update(embeddings_hash);
    h.update((grid.lines as u64).to_le_bytes());
    h.update((grid.words as u64).to_le_bytes());
    hex::encode(h.finalize())
}

fn feature_names(clip_id: &str) -> (PathBuf, PathBuf) {
    (
        PathBuf::from(format!("{clip_id}.mel.mnt")),
        PathBuf::from(format!("{clip_id}.lyr.mnt")),
    )
}

fn read_index(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default()
}

/// Writes `<clip>.mel.mnt` / `<clip>.lyr.mnt` per record and the feature
/// manifest into `out_dir`. Per-record problems are collected, not raised.
pub fn featurize(opts: &FeaturizeOptions) -> Result<FeaturizeSummary> {
    let (raw, base) = read_raw_manifest(&opts.raw_manifest)?;
    let table = EmbeddingTable::load(&opts.embeddings)?;
    let embeddings_hash = sha256_file(&opts.embeddings)?;
    create_dir(&opts.out_dir)?;
    let bank = MelFilterbank::standard();

    let prepared: Vec<Result<Prepared>> = raw.par_iter().map(|r| prepare(r, &base)).collect();
    let grid = opts.grid.unwrap_or_else(|| {
        let (lines, words) = prepared
            .iter()
            .flatten()
            .map(|p| grid_extent(&p.tokens))
            .fold((0, 0), |(l, w), (a, b)| (l.max(a), w.max(b)));
        TextGrid {
            lines: lines.max(MIN_TEXT_EXTENT),
            words: words.max(MIN_TEXT_EXTENT),
        }
    });

    let index_path = opts.out_dir.join(CACHE_INDEX);
    let old_index = read_index(&index_path);
    let outcomes: Vec<Result<(String, bool)>> = raw
        .par_iter()
        .zip(prepared)
        .map(|(r, prep)| {
            let prep = prep?;
            let key = cache_key(&prep, grid, &embeddings_hash);
            let (mel, lyr) = feature_names(&r.clip_id);
            let (mel, lyr) = (opts.out_dir.join(mel), opts.out_dir.join(lyr));
            if old_index.get(&r.clip_id) == Some(&key) && mel.is_file() && lyr.is_file() {
                return Ok((key, false));
            }
            let spec = featurize_wav(&base.join(&r.audio), &bank)?;
            let lyrics = build_lyrics_tensor(&prep.tokens, &table, grid.words, grid.lines)?;
            spec.tensor().save(&mel)?;
            lyrics.tensor.save(&lyr)?;
            Ok((key, true))
        })
        .collect();

    let mut index = BTreeMap::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let (mut written, mut skipped) = (0, 0);
    for (r, outcome) in raw.iter().zip(outcomes) {
        match outcome {
            Ok((key, fresh)) => {
                if fresh {
                    written += 2;
                } else {
                    skipped += 1;
                }
                index.insert(r.clip_id.clone(), key);
                let (audio_feat, lyrics_feat) = feature_names(&r.clip_id);
                records.push(FeatureRecord {
                    clip_id: r.clip_id.clone(),
                    audio_feat,
                    lyrics_feat,
                    label: r.label,
                    split: r.split,
                });
            }
            Err(e) => failures.push(RecordFailure {
                clip_id: r.clip_id.clone(),
                error: e.to_string(),
            }),
        }
    }

    let manifest = DatasetManifest {
        grid,
        records,
        base_dir: opts.out_dir.clone(),
    };
    let manifest_path = opts.out_dir.join(FEATURE_MANIFEST);
    if fs::read_to_string(&manifest_path).ok().as_deref() != Some(manifest.to_jsonl().as_str()) {
        manifest.save(&manifest_path)?;
    }
    if index != old_index {
        let json = serde_json::to_string_pretty(&index).expect("index serializes");
        write_atomic(&index_path, |w: &mut dyn Write| w.write_all(json.as_bytes()))?;
    }
    let failures_path = opts.out_dir.join(FAILURES_FILE);
    if failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
        }
    } else {
        let json = serde_json::to_string_pretty(&failures).expect("failures serialize");
        write_atomic(&failures_path, |w: &mut dyn Write| w.write_all(json.as_bytes()))?;
    }

    Ok(FeaturizeSummary {
        manifest_path,
        grid,
        records: manifest.records.len(),
        written,
        skipped,
        failures,
    })
}
