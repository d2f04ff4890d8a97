use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::explain::{ContrastPair, EffectsTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionLine {
    pub emotion: String,
    pub predicted: f64,
    pub annotated: Option<f64>,
    pub intercept: f64,
    /// One term per feature, in feature order.
    pub terms: Vec<Contribution>,
    /// Largest positive effects, strongest first.
    pub top_positive: Vec<Contribution>,
    /// Largest negative effects, strongest first.
    pub top_negative: Vec<Contribution>,
}

/// Per-emotion prediction of one song with its additive decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongReport {
    pub provenance: Provenance,
    pub song_id: String,
    pub lines: Vec<EmotionLine>,
}

/// Builds the report for `song_id`; `annotated` holds the song's ground-truth targets if known.
pub fn song_report(
    song_id: &str,
    effects: &EffectsTensor,
    annotated: Option<&[f64]>,
    top_k: usize,
    provenance: &Provenance,
) -> Result<SongReport> {
    let s = effects.song_index(song_id)?;
    if let Some(a) = annotated {
        if a.len() != effects.targets.len() {
            return Err(Error::Dimension(format!("{} annotated values for {} emotions", a.len(), effects.targets.len())));
        }
    }
    let lines = effects
        .targets
        .iter()
        .enumerate()
        .map(|(t, emotion)| {
            let terms: Vec<Contribution> = effects
                .features
                .iter()
                .enumerate()
                .map(|(f, feature)| Contribution { feature: feature.clone(), effect: effects.effect(s, f, t) })
                .collect();
            let mut pos: Vec<Contribution> = terms.iter().filter(|c| c.effect > 0.0).cloned().collect();
            pos.sort_by(|a, b| b.effect.total_cmp(&a.effect));
            pos.truncate(top_k);
            let mut neg: Vec<Contribution> = terms.iter().filter(|c| c.effect < 0.0).cloned().collect();
            neg.sort_by(|a, b| a.effect.total_cmp(&b.effect));
            neg.truncate(top_k);
            EmotionLine {
                emotion: emotion.clone(),
                predicted: effects.prediction(s, t),
                annotated: annotated.map(|a| a[t]),
                intercept: effects.intercepts[t],
                terms,
                top_positive: pos,
                top_negative: neg,
            }
        })
        .collect();
    Ok(SongReport { provenance: provenance.clone(), song_id: song_id.to_string(), lines })
}

impl SongReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.provenance.comment_line());
        let _ = writeln!(s, "song {}", self.song_id);
        for l in &self.lines {
            let ann = l.annotated.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "  {:<8} predicted {:.3}  annotated {}  intercept {:+.3}", l.emotion, l.predicted, ann, l.intercept);
            let fmt = |v: &[Contribution]| v.iter().map(|c| format!("{} {:+.3}", c.feature, c.effect)).collect::<Vec<_>>().join(", ");
            if !l.top_positive.is_empty() {
                let _ = writeln!(s, "    + {}", fmt(&l.top_positive));
            }
            if !l.top_negative.is_empty() {
                let _ = writeln!(s, "    - {}", fmt(&l.top_negative));
            }
        }
        s
    }
}

/// Profile table of several songs: predicted values for every song, then annotated values.
pub fn profile_table(reports: &[SongReport]) -> String {
    let mut s = String::new();
    let n = reports.len();
    let _ = writeln!(s, "{:<10} | {:^w$} | {:^w$}", "", "predicted", "annotated", w = 8 * n);
    let _ = write!(s, "{:<10} |", "");
    for _ in 0..2 {
        for r in reports {
            let _ = write!(s, " {:>7}", format!("#{}", r.song_id));
        }
        s.push_str(" |");
    }
    s.push('\n');
    let Some(first) = reports.first() else { return s };
    for (t, line) in first.lines.iter().enumerate() {
        let _ = write!(s, "{:<10} |", line.emotion);
        for r in reports {
            let _ = write!(s, " {:>7.2}", r.lines[t].predicted);
        }
        s.push_str(" |");
        for r in reports {
            let ann = r.lines[t].annotated.map(|a| format!("{a:.2}")).unwrap_or_else(|| "-".into());
            let _ = write!(s, " {ann:>7}");
        }
        s.push_str(" |\n");
    }
    s
}

/// Both songs of a contrast pair with the pair's distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub provenance: Provenance,
    pub pair: ContrastPair,
    pub songs: [String; 2],
    pub reports: Vec<SongReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{compute_effects, FeatureSource, LinearMap};

    #[test]
    fn zero_weights_have_no_terms() {
        let map = LinearMap::new(&["a", "b"], &["x"], vec![vec![0.0], vec![0.0]], vec![0.4]).unwrap();
        let e = compute_effects(&map, &[vec![0.3, 0.9]], &["s".to_string()], FeatureSource::Annotations).unwrap();
        let r = song_report("s", &e, Some(&[0.5]), 3, &Provenance::default()).unwrap();
        assert_eq!(r.lines[0].predicted, 0.4);
        assert!(r.lines[0].top_positive.is_empty() && r.lines[0].top_negative.is_empty());
        let table = profile_table(&[r.clone()]);
        assert!(table.contains("0.40 |    0.50"), "{table}");
        assert!(matches!(song_report("t", &e, None, 3, &Provenance::default()), Err(Error::Lookup(_))));
    }
}
