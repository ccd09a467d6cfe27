//! Lyrics featurization: word-vector table loading, tokenization and the
//! padded `lines × words × 100` lyrics tensor.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Width of every word vector.
pub const EMBEDDING_DIM: usize = 100;

/// What happens to tokens missing from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// Unknown words become the zero vector, like padding.
    #[default]
    Zero,
}

#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    vectors: HashMap<String, Vec<f64>>,
    pub oov: OovPolicy,
    /// Lines that failed to parse while loading.
    pub skipped: usize,
    /// Free-form provenance, e.g. the corpus the vectors were trained on.
    pub source: Option<String>,
}

impl EmbeddingTable {
    /// Parses `token v1 … v100` lines. Malformed lines are counted and skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table = Self::from_reader(BufReader::new(f), path)?;
        table.source = Some(path.display().to_string());
        Ok(table)
    }

    pub fn from_reader(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let mut vectors = HashMap::new();
        let mut skipped = 0;
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            match parse_line(&line) {
                Some((token, vec)) => {
                    vectors.entry(token).or_insert(vec);
                }
                None => skipped += 1,
            }
        }
        if vectors.is_empty() {
            return Err(Error::format(
                origin,
                format!("no valid {EMBEDDING_DIM}-d embedding lines ({skipped} skipped)"),
            ));
        }
        Ok(Self {
            vectors,
            oov: OovPolicy::Zero,
            skipped,
            source: None,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        EMBEDDING_DIM
    }

    /// Case-insensitive lookup.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.vectors
            .get(&token.to_lowercase())
            .map(Vec::as_slice)
    }
}

fn parse_line(line: &str) -> Option<(String, Vec<f64>)> {
    let mut parts = line.split_whitespace();
    let token = parts.next()?.to_lowercase();
    let vec = parts
        .map(|p| p.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<f64>>>()?;
    (vec.len() == EMBEDDING_DIM).then_some((token, vec))
}

/// Splits lyrics into lines of lowercase tokens. Characters other than word
/// characters, apostrophes and whitespace are removed; empty lines vanish.
pub fn tokenize(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|line| {
            let cleaned: String = line
                .chars()
                .filter(|c| c.is_alphanumeric() || *c == '_' || *c == '\'' || c.is_whitespace())
                .flat_map(char::to_lowercase)
                .collect();
            cleaned
                .split_whitespace()
                .filter(|t| t.chars().any(|c| c.is_alphanumeric() || c == '_'))
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .filter(|tokens| !tokens.is_empty())
        .collect()
}

/// Padded lyrics tensor `[lines × words × 100]` plus a `[lines × words]`
/// mask of slots that held a real token (known or not).
#[derive(Debug, Clone, PartialEq)]
pub struct LyricsTensor {
    pub tensor: Tensor,
    pub mask: Vec<bool>,
}

impl LyricsTensor {
    pub fn lines(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn words(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn is_real(&self, line: usize, word: usize) -> bool {
        self.mask[line * self.words() + word]
    }
}

/// Places token `w` of line `l` at slot `(l, w)`; truncates past `max_lines`
/// / `max_words` and zero-fills the rest.
pub fn build_lyrics_tensor(
    lines: &[Vec<String>],
    table: &EmbeddingTable,
    max_words: usize,
    max_lines: usize,
) -> Result<LyricsTensor> {
    if max_words == 0 || max_lines == 0 {
        return Err(Error::config(format!(
            "lyrics grid must be at least 1×1, got lines={max_lines} words={max_words}"
        )));
    }
    let d = EMBEDDING_DIM;
    let mut data = vec![0.0; max_lines * max_words * d];
    let mut mask = vec![false; max_lines * max_words];
    for (l, line) in lines.iter().take(max_lines).enumerate() {
        for (w, token) in line.iter().take(max_words).enumerate() {
            let slot = l * max_words + w;
            mask[slot] = true;
            if let Some(v) = table.lookup(token) {
                data[slot * d..(slot + 1) * d].copy_from_slice(v);
            }
        }
    }
    Ok(LyricsTensor {
        tensor: Tensor::new(&[max_lines, max_words, d], data)?,
        mask,
    })
}

/// `(line count, longest line)` of a tokenized song.
pub fn grid_extent(lines: &[Vec<String>]) -> (usize, usize) {
    (lines.len(), lines.iter().map(Vec::len).max().unwrap_or(0))
}
