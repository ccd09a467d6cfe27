use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NUM_CLASSES;

/// The five mood clusters, serialized as Roman numerals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoodCluster {
    I,
    II,
    III,
    IV,
    V,
}

impl MoodCluster {
    pub const ALL: [MoodCluster; NUM_CLASSES] = [Self::I, Self::II, Self::III, Self::IV, Self::V];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or(Error::Label { label: i, classes: NUM_CLASSES })
    }

    pub fn numeral(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
            Self::IV => "IV",
            Self::V => "V",
        }
    }

    pub fn moods(self) -> &'static [&'static str] {
        match self {
            Self::I => &["passionate", "rousing", "confident", "boisterous"],
            Self::II => &["cheerful", "fun", "sweet", "amiable"],
            Self::III => &["poignant", "wistful", "bittersweet", "autumnal"],
            Self::IV => &["humorous", "silly", "campy", "quirky", "witty"],
            Self::V => &["aggressive", "fiery", "intense", "volatile"],
        }
    }
}

impl fmt::Display for MoodCluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.numeral())
    }
}

impl FromStr for MoodCluster {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.numeral() == s)
            .ok_or_else(|| Error::input(format!("unknown mood cluster {s:?}, expected I..V")))
    }
}
