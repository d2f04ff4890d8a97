use serde::{Deserialize, Serialize};

use crate::artifact::Provenance;
use crate::error::{Error, Result};
use crate::eval::pearson_or_zero;

/// Pearson r between every feature column and every target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub targets: Vec<String>,
    /// Feature-major.
    pub values: Vec<f64>,
    /// Cells where a constant column made r undefined; their value is 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn get(&self, feature: usize, target: usize) -> f64 {
        self.values[feature * self.targets.len() + target]
    }

    pub fn is_degenerate(&self, feature: usize, target: usize) -> bool {
        self.degenerate[feature * self.targets.len() + target]
    }

    pub fn to_csv(&self, provenance: &Provenance) -> Result<String> {
        matrix_csv(provenance, &self.features, &self.targets, &self.values)
    }
}

pub(crate) fn matrix_csv(provenance: &Provenance, rows: &[String], cols: &[String], values: &[f64]) -> Result<String> {
    let mut out = Vec::new();
    provenance.write_comment(&mut out)?;
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let mut header = vec!["feature".to_string()];
        header.extend(cols.iter().cloned());
        w.write_record(&header)?;
        for (i, r) in rows.iter().enumerate() {
            let mut rec = vec![r.clone()];
            rec.extend(values[i * cols.len()..(i + 1) * cols.len()].iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out).expect("csv output is utf-8"))
}

pub fn correlation_matrix(
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    feature_names: &[&str],
    target_names: &[&str],
) -> Result<CorrelationMatrix> {
    let n = features.len();
    if targets.len() != n {
        return Err(Error::Dimension(format!("{n} feature rows but {} target rows", targets.len())));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("correlation needs at least 2 songs, got {n}")));
    }
    let (p, q) = (feature_names.len(), target_names.len());
    if features.iter().any(|r| r.len() != p) || targets.iter().any(|r| r.len() != q) {
        return Err(Error::Dimension(format!("rows must have {p} features and {q} targets")));
    }
    let fcol = |j: usize| features.iter().map(|r| r[j]).collect::<Vec<_>>();
    let tcols: Vec<Vec<f64>> = (0..q).map(|j| targets.iter().map(|r| r[j]).collect()).collect();
    let mut values = Vec::with_capacity(p * q);
    let mut degenerate = Vec::with_capacity(p * q);
    for f in 0..p {
        let x = fcol(f);
        for t in &tcols {
            let (r, d) = pearson_or_zero(&x, t)?;
            values.push(r);
            degenerate.push(d);
        }
    }
    Ok(CorrelationMatrix {
        features: feature_names.iter().map(|s| s.to_string()).collect(),
        targets: target_names.iter().map(|s| s.to_string()).collect(),
        values,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_column_and_constant_column() {
        let f: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 1.0]).collect();
        let t: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let m = correlation_matrix(&f, &t, &["a", "c"], &["e"]).unwrap();
        assert!((m.get(0, 0) - 1.0).abs() < 1e-15);
        assert!(m.is_degenerate(1, 0) && m.get(1, 0) == 0.0);
    }
}
