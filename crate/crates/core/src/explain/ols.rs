use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map `y = x W + b` from feature columns to target columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub features: Vec<String>,
    pub targets: Vec<String>,
    /// `features.len()` rows of `targets.len()` weights.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

impl LinearMap {
    pub fn new(features: &[&str], targets: &[&str], weights: Vec<Vec<f64>>, intercepts: Vec<f64>) -> Result<Self> {
        let map = LinearMap {
            features: features.iter().map(|s| s.to_string()).collect(),
            targets: targets.iter().map(|s| s.to_string()).collect(),
            weights,
            intercepts,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.features.len(), self.targets.len());
        if self.weights.len() != p || self.weights.iter().any(|r| r.len() != q) || self.intercepts.len() != q {
            return Err(Error::Dimension(format!("linear map must be {p}x{q} with {q} intercepts")));
        }
        if self.weights.iter().flatten().chain(&self.intercepts).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("linear map has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(Error::Dimension(format!("expected {} features, got {}", self.n_features(), x.len())));
        }
        let mut y = self.intercepts.clone();
        for (xf, row) in x.iter().zip(&self.weights) {
            for (yo, w) in y.iter_mut().zip(row) {
                *yo += w * xf;
            }
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsOptions {
    /// Singular values below `rcond * max` count as zero.
    pub rcond: f64,
    /// Return the minimum-norm solution instead of failing on rank deficiency.
    pub pseudo_inverse: bool,
}

impl Default for OlsOptions {
    fn default() -> Self {
        OlsOptions { rcond: 1e-10, pseudo_inverse: false }
    }
}

/// Least-squares fit of `y` on `[x | 1]` per target column.
pub fn fit_ols(x: &[Vec<f64>], y: &[Vec<f64>], features: &[&str], targets: &[&str]) -> Result<LinearMap> {
    fit_ols_with(x, y, features, targets, OlsOptions::default())
}

pub fn fit_ols_with(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    features: &[&str],
    targets: &[&str],
    opts: OlsOptions,
) -> Result<LinearMap> {
    let (n, p, q) = (x.len(), features.len(), targets.len());
    if y.len() != n {
        return Err(Error::Dimension(format!("{n} feature rows but {} target rows", y.len())));
    }
    if x.iter().any(|r| r.len() != p) || y.iter().any(|r| r.len() != q) {
        return Err(Error::Dimension(format!("rows must have {p} features and {q} targets")));
    }
    if n < p + 2 {
        return Err(Error::InsufficientData(format!("{n} rows for {p} features plus intercept; need at least {}", p + 2)));
    }
    if x.iter().flatten().chain(y.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite values in regression data".into()));
    }
    let m = p + 1;

    // design [X | 1] with each column scaled to unit norm
    let mut a = DMatrix::from_fn(n, m, |i, j| if j < p { x[i][j] } else { 1.0 });
    let scale: Vec<f64> = (0..m).map(|j| a.column(j).norm()).collect();
    for (j, &s) in scale.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(j).unscale_mut(s);
        }
    }
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let smax = sigma.max();
    let keep: Vec<bool> = sigma.iter().map(|&s| s > opts.rcond * smax && s > 0.0).collect();

    if keep.iter().any(|k| !k) && !opts.pseudo_inverse {
        let names: Vec<String> = features.iter().map(|s| s.to_string()).chain(["intercept".to_string()]).collect();
        let mut dependent = vec![false; m];
        for k in (0..m).filter(|&k| !keep[k]) {
            let null = v_t.row(k);
            let vmax = null.amax();
            for j in 0..m {
                if null[j].abs() > 1e-6 * vmax {
                    dependent[j] = true;
                }
            }
        }
        let columns = (0..m).filter(|&j| dependent[j] || scale[j] == 0.0).map(|j| names[j].clone()).collect();
        return Err(Error::Singular { columns });
    }

    let y_mat = DMatrix::from_fn(n, q, |i, t| y[i][t]);
    let uty = u.transpose() * &y_mat;
    let mut b = DMatrix::<f64>::zeros(m, q);
    for k in (0..m).filter(|&k| keep[k]) {
        b += v_t.row(k).transpose() * (uty.row(k) / sigma[k]);
    }
    let unscale = |j: usize| if scale[j] > 0.0 { 1.0 / scale[j] } else { 0.0 };
    let weights = (0..p).map(|j| (0..q).map(|t| b[(j, t)] * unscale(j)).collect()).collect();
    let intercepts = (0..q).map(|t| b[(p, t)] * unscale(p)).collect();
    LinearMap::new(features, targets, weights, intercepts)
}
