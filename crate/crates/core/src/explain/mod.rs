//! Linear explanations: least-squares maps, feature effects and contrasting song pairs.

mod boxplot;
mod correlation;
mod effects;
mod ols;
mod pairs;
mod report;
pub mod svg;

pub use boxplot::{effects_distribution, quantile_sorted, BoxStats, EffectsDistribution};
pub use correlation::{correlation_matrix, CorrelationMatrix};
pub use effects::{compute_effects, EffectsTensor, FeatureSource};
pub use ols::{fit_ols, fit_ols_with, LinearMap, OlsOptions};
pub use pairs::{min_max_scale, pairwise_distances, select_contrast_pair, select_from_distances, ContrastPair, PairMode};
pub use report::{profile_table, song_report, Contribution, EmotionLine, PairReport, SongReport};

use crate::artifact::Provenance;
use crate::error::Result;

/// Weight matrix CSV, features as rows and targets as columns, with an intercept row.
pub fn weights_csv(map: &LinearMap, provenance: &Provenance) -> Result<String> {
    let mut rows = map.features.clone();
    rows.push("intercept".into());
    let values: Vec<f64> = map.weights.iter().flatten().chain(&map.intercepts).copied().collect();
    correlation::matrix_csv(provenance, &rows, &map.targets, &values)
}
