//! JSON-lines feature manifest: a `{lines_max, words_max}` header object
//! followed by one record per clip. Relative paths resolve against the
//! manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::labels::MoodCluster;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::TextGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    lines_max: usize,
    words_max: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRecord {
    pub clip_id: String,
    pub audio_feat: PathBuf,
    pub lyrics_feat: PathBuf,
    pub label: MoodCluster,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    /// Corpus-wide lyrics grid every `.lyr.mnt` file is padded to.
    pub grid: TextGrid,
    pub records: Vec<FeatureRecord>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Parses and validates; every referenced feature file must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let manifest = Self::parse(&text, base, path)?;
        for r in &manifest.records {
            for p in [&r.audio_feat, &r.lyrics_feat] {
                let full = manifest.resolve(p);
                if !full.is_file() {
                    return Err(Error::input(format!(
                        "{}: clip {} references missing feature file {}",
                        path.display(),
                        r.clip_id,
                        full.display()
                    )));
                }
            }
        }
        Ok(manifest)
    }

    /// Parses without touching the filesystem.
    pub fn parse(text: &str, base_dir: PathBuf, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::format(origin, "empty manifest"))?;
        let header: Header = serde_json::from_str(first)
            .map_err(|e| Error::format(origin, format!("line 1: bad header: {e}")))?;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in lines {
            let r: FeatureRecord = serde_json::from_str(line)
                .map_err(|e| Error::format(origin, format!("line {}: {e}", i + 1)))?;
            if !seen.insert(r.clip_id.clone()) {
                return Err(Error::format(
                    origin,
                    format!("line {}: duplicate clip_id {}", i + 1, r.clip_id),
                ));
            }
            records.push(r);
        }
        Ok(Self {
            grid: TextGrid {
                lines: header.lines_max,
                words: header.words_max,
            },
            records,
            base_dir,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            lines_max: self.grid.lines,
            words_max: self.grid.words,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_jsonl();
        write_atomic(path, |w: &mut dyn Write| w.write_all(text.as_bytes()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn records_in(&self, split: Option<Split>) -> impl Iterator<Item = &FeatureRecord> {
        self.records
            .iter()
            .filter(move |r| split.is_none_or(|s| r.split == s))
    }
}
