//! Confusion matrices, per-class precision/recall/F1 and report formatting.

use serde::Serialize;
use serde_json::json;

use super::labels::MoodCluster;
use crate::error::{Error, Result};
use crate::model::NUM_CLASSES;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::default();
        for (t, p) in pairs {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        for c in [truth, predicted] {
            if c >= NUM_CLASSES {
                return Err(Error::Label { label: c, classes: NUM_CLASSES });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_count(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted_count(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    /// Unweighted mean of the per-class F1 values.
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class scores with 0/0 taken as 0 for precision, recall and F1.
pub fn f1(confusion: &ConfusionMatrix) -> ClassScores {
    let mut s = ClassScores {
        precision: [0.0; NUM_CLASSES],
        recall: [0.0; NUM_CLASSES],
        f1: [0.0; NUM_CLASSES],
        macro_f1: 0.0,
    };
    for c in 0..NUM_CLASSES {
        let tp = confusion.counts[c][c];
        let p = ratio(tp, confusion.predicted_count(c));
        let r = ratio(tp, confusion.true_count(c));
        s.precision[c] = p;
        s.recall[c] = r;
        s.f1[c] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    s.macro_f1 = s.f1.iter().sum::<f64>() / NUM_CLASSES as f64;
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub scores: ClassScores,
    pub samples: u64,
}

fn pct(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        Self {
            scores: f1(&confusion),
            samples: confusion.total(),
            confusion,
        }
    }

    pub fn macro_f1(&self) -> f64 {
        self.scores.macro_f1
    }

    /// Scores as percentages rounded to two decimals.
    pub fn to_json(&self) -> serde_json::Value {
        let per_class: Vec<_> = MoodCluster::ALL
            .iter()
            .map(|c| {
                let i = c.index();
                json!({
                    "cluster": c.numeral(),
                    "precision": pct(self.scores.precision[i]),
                    "recall": pct(self.scores.recall[i]),
                    "f1": pct(self.scores.f1[i]),
                    "support": self.confusion.true_count(i),
                })
            })
            .collect();
        json!({
            "samples": self.samples,
            "macro_f1": pct(self.scores.macro_f1),
            "per_class": per_class,
            "confusion": self.confusion.counts,
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str("cluster  precision  recall     f1  support\n");
        for c in MoodCluster::ALL {
            let i = c.index();
            out.push_str(&format!(
                "{:<7}  {:>9.2}  {:>6.2}  {:>5.2}  {:>7}\n",
                c.numeral(),
                100.0 * self.scores.precision[i],
                100.0 * self.scores.recall[i],
                100.0 * self.scores.f1[i],
                self.confusion.true_count(i)
            ));
        }
        out.push_str(&format!("macro F1 {:.2}  ({} samples)\n", 100.0 * self.scores.macro_f1, self.samples));
        out.push_str("confusion (rows true, cols predicted)\n");
        for (c, row) in MoodCluster::ALL.iter().zip(&self.confusion.counts) {
            let cells: Vec<String> = row.iter().map(|n| format!("{n:>5}")).collect();
            out.push_str(&format!("{:<4}{}\n", c.numeral(), cells.join("")));
        }
        out
    }
}

/// One row per model variant: `Model  F1 (%)`, from `(name, macro F1)` pairs.
pub fn format_ablation_table(rows: &[(&str, f64)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Model".len());
    let mut out = format!("{:<width$}  F1 (%)\n", "Model");
    for (name, f1) in rows {
        out.push_str(&format!("{:<width$}  {:>6.2}\n", name, 100.0 * f1));
    }
    out
}
