use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::explain::LinearMap;

/// Where the feature values multiplied into the effects came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSource {
    Annotations,
    Predictions { model: String },
}

/// `effect[s, f, e] = weight[f, e] * feature[s, f]` for every song.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsTensor {
    pub song_ids: Vec<String>,
    pub features: Vec<String>,
    pub targets: Vec<String>,
    pub intercepts: Vec<f64>,
    pub source: FeatureSource,
    /// Song-major, then feature, then target.
    pub values: Vec<f64>,
}

impl EffectsTensor {
    pub fn n_songs(&self) -> usize {
        self.song_ids.len()
    }

    pub fn effect(&self, song: usize, feature: usize, target: usize) -> f64 {
        let (p, q) = (self.features.len(), self.targets.len());
        self.values[(song * p + feature) * q + target]
    }

    /// Intercept plus the sum of the song's effects for `target`.
    pub fn prediction(&self, song: usize, target: usize) -> f64 {
        self.intercepts[target] + (0..self.features.len()).map(|f| self.effect(song, f, target)).sum::<f64>()
    }

    pub fn song_index(&self, id: &str) -> Result<usize> {
        self.song_ids.iter().position(|s| s == id).ok_or_else(|| Error::Lookup(id.to_string()))
    }

    /// All songs' effects for one (feature, target) cell.
    pub fn cell(&self, feature: usize, target: usize) -> Vec<f64> {
        (0..self.n_songs()).map(|s| self.effect(s, feature, target)).collect()
    }

    /// Long-format CSV: `song_id,feature,emotion,effect`.
    pub fn to_csv(&self, provenance: &Provenance) -> Result<String> {
        let mut out = Vec::new();
        provenance.write_comment(&mut out)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["song_id", "feature", "emotion", "effect"])?;
            for (s, id) in self.song_ids.iter().enumerate() {
                for (f, feat) in self.features.iter().enumerate() {
                    for (t, target) in self.targets.iter().enumerate() {
                        w.write_record([id, feat, target, &format!("{}", self.effect(s, f, t))])?;
                    }
                }
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

pub fn compute_effects(
    map: &LinearMap,
    x: &[Vec<f64>],
    song_ids: &[String],
    source: FeatureSource,
) -> Result<EffectsTensor> {
    map.validate()?;
    if x.len() != song_ids.len() {
        return Err(Error::Dimension(format!("{} feature rows for {} songs", x.len(), song_ids.len())));
    }
    let (p, q) = (map.n_features(), map.n_targets());
    let mut values = Vec::with_capacity(x.len() * p * q);
    for row in x {
        if row.len() != p {
            return Err(Error::Dimension(format!("expected {p} features, got {}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        for (xf, w) in row.iter().zip(&map.weights) {
            values.extend(w.iter().map(|wt| wt * xf));
        }
    }
    Ok(EffectsTensor {
        song_ids: song_ids.to_vec(),
        features: map.features.clone(),
        targets: map.targets.clone(),
        intercepts: map.intercepts.clone(),
        source,
        values,
    })
}
