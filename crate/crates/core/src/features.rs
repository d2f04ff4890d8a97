//! The seven mid-level perceptual features and eight emotion dimensions.

use serde::{Deserialize, Serialize};

pub const N_MIDLEVEL: usize = 7;
pub const N_EMOTIONS: usize = 8;

/// Column names of mid-level annotations, in canonical order.
pub const MIDLEVEL_NAMES: [&str; N_MIDLEVEL] = [
    "melodiousness",
    "articulation",
    "rhythmic_stability",
    "rhythmic_complexity",
    "dissonance",
    "tonal_stability",
    "minorness",
];

/// Column names of emotion annotations, in canonical order.
pub const EMOTION_NAMES: [&str; N_EMOTIONS] =
    ["valence", "energy", "tension", "anger", "fear", "happy", "sad", "tender"];

/// Annotations are stored as raw ratings times this factor.
pub const RATING_SCALE: f64 = 0.1;

/// Annotation schema of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Midlevel,
    Emotion,
}

impl Schema {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::Midlevel => &MIDLEVEL_NAMES,
            Schema::Emotion => &EMOTION_NAMES,
        }
    }

    pub fn width(self) -> usize {
        self.columns().len()
    }

    /// Admissible raw rating range before scaling.
    pub fn raw_range(self) -> (f64, f64) {
        match self {
            Schema::Midlevel => (1.0, 10.0),
            Schema::Emotion => (1.0, 7.83),
        }
    }
}

/// Seven mid-level values in [`MIDLEVEL_NAMES`] order. Predictions are not clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MidLevelProfile(pub [f64; N_MIDLEVEL]);

/// Eight emotion values in [`EMOTION_NAMES`] order. Predictions are not clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionProfile(pub [f64; N_EMOTIONS]);

impl MidLevelProfile {
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        v.try_into().ok().map(MidLevelProfile)
    }
}

impl EmotionProfile {
    pub fn from_slice(v: &[f64]) -> Option<Self> {
        v.try_into().ok().map(EmotionProfile)
    }
}
