use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Objective maximized when mining a contrasting pair of songs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// `d_E - (1 - d_Mid)`.
    Paper,
    /// `d_Mid - d_E`: similar emotions, different mid-level profiles.
    Intent,
}

impl FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper" => Ok(PairMode::Paper),
            "intent" => Ok(PairMode::Intent),
            other => Err(Error::Config(format!("unknown pair mode `{other}`; expected paper or intent"))),
        }
    }
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairMode::Paper => "paper",
            PairMode::Intent => "intent",
        })
    }
}

impl PairMode {
    pub fn score(self, d_e_scaled: f64, d_mid_scaled: f64) -> f64 {
        match self {
            PairMode::Paper => d_e_scaled - (1.0 - d_mid_scaled),
            PairMode::Intent => d_mid_scaled - d_e_scaled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastPair {
    pub i: usize,
    pub j: usize,
    pub mode: PairMode,
    pub d_e: f64,
    pub d_mid: f64,
    pub d_e_scaled: f64,
    pub d_mid_scaled: f64,
    /// `d_E - (1 - d_Mid)` on scaled distances, whatever the mode.
    pub d_comb: f64,
    /// The maximized objective.
    pub score: f64,
    /// Set when a distance set had zero range and was scaled to all zeros.
    pub degenerate: bool,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All pairwise distances in `(i, j)` lexicographic order, `i < j`.
pub fn pairwise_distances(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(euclid(&rows[i], &rows[j]));
        }
    }
    d
}

/// Min-max scaling to `[0, 1]`; a zero-range set maps to zeros and reports `true`.
pub fn min_max_scale(d: &[f64]) -> (Vec<f64>, bool) {
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0) {
        return (vec![0.0; d.len()], true);
    }
    (d.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect(), false)
}

/// Pair selection from precomputed raw distances in `(i, j)` lexicographic order.
pub fn select_from_distances(n: usize, d_e: &[f64], d_mid: &[f64], mode: PairMode) -> Result<ContrastPair> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("pair selection needs at least 2 songs, got {n}")));
    }
    let pairs = n * (n - 1) / 2;
    if d_e.len() != pairs || d_mid.len() != pairs {
        return Err(Error::Dimension(format!("expected {pairs} distances per space")));
    }
    let (se, de) = min_max_scale(d_e);
    let (sm, dm) = min_max_scale(d_mid);
    let mut best: Option<(usize, usize, usize, f64)> = None;
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let s = mode.score(se[k], sm[k]);
            if best.is_none_or(|b| s > b.3) {
                best = Some((i, j, k, s));
            }
            k += 1;
        }
    }
    let (i, j, k, score) = best.expect("at least one pair");
    Ok(ContrastPair {
        i,
        j,
        mode,
        d_e: d_e[k],
        d_mid: d_mid[k],
        d_e_scaled: se[k],
        d_mid_scaled: sm[k],
        d_comb: PairMode::Paper.score(se[k], sm[k]),
        score,
        degenerate: de || dm,
    })
}

/// Selects the song pair maximizing the mode's objective over scaled distances.
pub fn select_contrast_pair(emotions: &[Vec<f64>], midlevel: &[Vec<f64>], mode: PairMode) -> Result<ContrastPair> {
    if emotions.len() != midlevel.len() {
        return Err(Error::Dimension(format!("{} emotion rows but {} mid-level rows", emotions.len(), midlevel.len())));
    }
    select_from_distances(emotions.len(), &pairwise_distances(emotions), &pairwise_distances(midlevel), mode)
}
