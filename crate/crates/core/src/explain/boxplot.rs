use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::explain::EffectsTensor;

/// Quantile by linear interpolation between order statistics (`h = (n-1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey boxplot summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("boxplot of no values".into()));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.75));
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = s.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v)).collect();
        Ok(BoxStats {
            n: s.len(),
            median,
            q1,
            q3,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: s.iter().copied().filter(|v| !(lo_fence..=hi_fence).contains(v)).collect(),
        })
    }
}

/// Boxplot statistics for every (feature, target) cell of an effects tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsDistribution {
    pub features: Vec<String>,
    pub targets: Vec<String>,
    /// Feature-major.
    pub cells: Vec<BoxStats>,
}

impl EffectsDistribution {
    pub fn cell(&self, feature: usize, target: usize) -> &BoxStats {
        &self.cells[feature * self.targets.len() + target]
    }

    pub fn to_csv(&self, provenance: &Provenance) -> Result<String> {
        let mut out = Vec::new();
        provenance.write_comment(&mut out)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record([
                "feature", "emotion", "n", "median", "q1", "q3", "whisker_low", "whisker_high", "n_outliers",
            ])?;
            for (f, feat) in self.features.iter().enumerate() {
                for (t, target) in self.targets.iter().enumerate() {
                    let b = self.cell(f, t);
                    w.write_record([
                        feat.clone(),
                        target.clone(),
                        b.n.to_string(),
                        b.median.to_string(),
                        b.q1.to_string(),
                        b.q3.to_string(),
                        b.whisker_low.to_string(),
                        b.whisker_high.to_string(),
                        b.outliers.len().to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

pub fn effects_distribution(e: &EffectsTensor) -> Result<EffectsDistribution> {
    let mut cells = Vec::with_capacity(e.features.len() * e.targets.len());
    for f in 0..e.features.len() {
        for t in 0..e.targets.len() {
            cells.push(BoxStats::from_values(&e.cell(f, t))?);
        }
    }
    Ok(EffectsDistribution { features: e.features.clone(), targets: e.targets.clone(), cells })
}
