//! Seeded train/test partitions.
//!
//! Song ids are sorted, then shuffled with a Fisher-Yates pass driven by
//! PCG64 (XSL-RR 128/64) seeded through `seed_from_u64`. Bounded integers
//! are drawn by rejection on `next_u64`, so the permutation depends only on
//! the seed and the id set, not on the platform or input order.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PRNG_NAME: &str = "pcg64-xsl-rr-128-64";
pub const SHUFFLE_NAME: &str = "fisher-yates-descending-rejection-sampled";

/// Offset between a run seed and the seed of its validation hold-out.
const VALIDATION_STREAM: u64 = 0x5EED_0000_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub ratio: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Uniform integer in `[0, bound)`.
fn bounded(rng: &mut Pcg64, bound: u64) -> u64 {
    let zone = u64::MAX - u64::MAX % bound;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Sorted copy of `ids` permuted by a Fisher-Yates shuffle under `seed`.
pub fn shuffled(ids: &[String], seed: u64) -> Vec<String> {
    let mut out = ids.to_vec();
    out.sort();
    let mut rng = Pcg64::seed_from_u64(seed);
    for i in (1..out.len()).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        out.swap(i, j);
    }
    out
}

/// Splits off `round(ratio * n)` ids; returns `(rest, held_out)`, both sorted.
pub fn hold_out(ids: &[String], ratio: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n = ids.len();
    let n_held = (ratio * n as f64).round() as usize;
    if n_held == 0 || n_held >= n {
        return Err(Error::Config(format!(
            "ratio {ratio} over {n} songs leaves an empty side"
        )));
    }
    let order = shuffled(ids, seed);
    let mut held = order[..n_held].to_vec();
    let mut rest = order[n_held..].to_vec();
    held.sort();
    rest.sort();
    Ok((rest, held))
}

/// `runs` independent train/test partitions; split `k` uses seed `base_seed + k`.
pub fn make_splits(song_ids: &[String], ratio: f64, base_seed: u64, runs: usize) -> Result<Vec<Split>> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    if song_ids.len() < 2 {
        return Err(Error::InsufficientData(format!("{} songs cannot be split", song_ids.len())));
    }
    let mut sorted = song_ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Duplicate(w[0].clone()));
    }
    (0..runs as u64)
        .map(|k| {
            let seed = base_seed.wrapping_add(k);
            let (train_ids, test_ids) = hold_out(&sorted, ratio, seed)?;
            Ok(Split { seed, ratio, train_ids, test_ids })
        })
        .collect()
}

/// Validation hold-out of a run's training songs, selected by the run seed.
pub fn validation_split(train_ids: &[String], fraction: f64, run_seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    hold_out(train_ids, fraction, run_seed.wrapping_add(VALIDATION_STREAM))
}

/// JSON record of the splits used by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub prng: String,
    pub shuffle: String,
    pub config_hash: String,
    pub splits: Vec<Split>,
}

impl SplitManifest {
    pub fn new(splits: Vec<Split>, config_hash: impl Into<String>) -> Self {
        SplitManifest {
            prng: PRNG_NAME.into(),
            shuffle: SHUFFLE_NAME.into(),
            config_hash: config_hash.into(),
            splits,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{i:03}")).collect()
    }

    #[test]
    fn ten_songs_twenty_percent() {
        let s = &make_splits(&ids(10), 0.2, 7, 1).unwrap()[0];
        assert_eq!((s.train_ids.len(), s.test_ids.len()), (8, 2));
        assert!(s.test_ids.iter().all(|t| !s.train_ids.contains(t)));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = make_splits(&ids(50), 0.2, 3, 4).unwrap();
        let mut rev = ids(50);
        rev.reverse();
        let b = make_splits(&rev, 0.2, 3, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].test_ids, a[1].test_ids);
        assert_eq!(a[2].seed, 5);
    }

    #[test]
    fn soundtracks_sized_test_side() {
        for s in make_splits(&ids(360), 0.2, 0, 10).unwrap() {
            assert_eq!(s.test_ids.len(), 72);
            assert_eq!(s.train_ids.len(), 288);
        }
    }

    #[test]
    fn degenerate_ratios_are_rejected() {
        assert!(matches!(make_splits(&ids(3), 0.1, 0, 1), Err(Error::Config(_))));
        assert!(matches!(make_splits(&ids(3), 0.9, 0, 1), Err(Error::Config(_))));
        assert!(make_splits(&ids(3), 1.0, 0, 1).is_err());
        assert!(make_splits(&ids(1), 0.5, 0, 1).is_err());
        assert!(make_splits(&ids(5), 0.2, 0, 0).is_err());
    }

    #[test]
    fn bounded_is_in_range() {
        let mut rng = Pcg64::seed_from_u64(1);
        for b in 1..50 {
            assert!(bounded(&mut rng, b) < b);
        }
    }
}
