//! Correlation metrics, results tables and the cost of explainability.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{fmt2, read_csv_provenance, Provenance};
use crate::error::{Error, Result};

/// Sample Pearson correlation, computed in two passes.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("pearson: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateCorrelation(format!("need at least 2 samples, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::DegenerateCorrelation("zero variance".into()));
    }
    if !sxy.is_finite() || !sxx.is_finite() || !syy.is_finite() {
        return Err(Error::Numeric("non-finite values in correlation".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r, with zero-variance inputs reported as `(0.0, true)`.
pub fn pearson_or_zero(x: &[f64], y: &[f64]) -> Result<(f64, bool)> {
    match pearson(x, y) {
        Ok(r) => Ok((r, false)),
        Err(Error::DegenerateCorrelation(_)) if x.len() == y.len() && x.len() >= 2 => Ok((0.0, true)),
        Err(e) => Err(e),
    }
}

/// One row of a results table: a model's r per target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub model: String,
    pub columns: Vec<String>,
    pub values: Vec<f64>,
}

impl ResultsRow {
    pub fn new(model: impl Into<String>, columns: &[&str], values: Vec<f64>) -> Result<Self> {
        if columns.len() != values.len() || columns.is_empty() {
            return Err(Error::Schema(format!("{} columns for {} values", columns.len(), values.len())));
        }
        Ok(ResultsRow { model: model.into(), columns: columns.iter().map(|c| c.to_string()).collect(), values })
    }

    /// Arithmetic mean over the row's entries.
    pub fn average(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|i| self.values[i])
    }
}

/// Rows sharing one column set, with the provenance of the run that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<ResultsRow>,
}

impl ResultsTable {
    pub fn new(provenance: Provenance, rows: Vec<ResultsRow>) -> Result<Self> {
        let columns = rows.first().ok_or(Error::EmptyTable)?.columns.clone();
        if let Some(r) = rows.iter().find(|r| r.columns != columns) {
            return Err(Error::Schema(format!("row `{}` has columns {:?}, expected {:?}", r.model, r.columns, columns)));
        }
        Ok(ResultsTable { provenance, columns, rows })
    }

    pub fn row(&self, model: &str) -> Option<&ResultsRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    /// CSV with a provenance comment, `model,<columns>,avg`, two decimals.
    pub fn to_csv(&self) -> Result<String> {
        let mut out = Vec::new();
        self.provenance.write_comment(&mut out)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["model".to_string()];
            header.extend(self.columns.iter().cloned());
            header.push("avg".into());
            w.write_record(&header)?;
            for r in &self.rows {
                let mut rec = vec![r.model.clone()];
                rec.extend(r.values.iter().map(|&v| fmt2(v)));
                rec.push(fmt2(r.average()));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    /// Parses a table CSV. When `expected` is given, every listed column must be present.
    pub fn from_csv(text: &str, expected: Option<&[&str]>) -> Result<Self> {
        let provenance = read_csv_provenance(text).unwrap_or_default();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.to_ascii_lowercase()).collect();
        if header.first().map(String::as_str) != Some("model") {
            return Err(Error::Schema("first column must be `model`".into()));
        }
        let columns: Vec<String> = header[1..].iter().filter(|h| *h != "avg").cloned().collect();
        if let Some(exp) = expected {
            if let Some(missing) = exp.iter().find(|c| !columns.iter().any(|h| h == *c)) {
                return Err(Error::Schema(format!("missing column `{missing}`")));
            }
            if let Some(extra) = columns.iter().find(|h| !exp.contains(&h.as_str())) {
                return Err(Error::Schema(format!("unexpected column `{extra}`")));
            }
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut values = Vec::with_capacity(columns.len());
            for (k, name) in header.iter().enumerate().skip(1) {
                if name == "avg" {
                    continue;
                }
                let cell = rec.get(k).unwrap_or("");
                values.push(cell.parse::<f64>().map_err(|e| Error::Parse {
                    row: i + 1,
                    column: name.clone(),
                    message: format!("`{cell}`: {e}"),
                })?);
            }
            rows.push(ResultsRow { model: rec.get(0).unwrap_or("").to_string(), columns: columns.clone(), values });
        }
        ResultsTable::new(provenance, rows)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads CSV or JSON depending on the file extension.
    pub fn load(path: impl AsRef<Path>, expected: Option<&[&str]>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let table = if path.extension().is_some_and(|e| e == "json") {
            ResultsTable::from_json(&text)?
        } else {
            ResultsTable::from_csv(&text, expected)?
        };
        if let Some(exp) = expected {
            if let Some(missing) = exp.iter().find(|c| !table.columns.iter().any(|h| h == *c)) {
                return Err(Error::Schema(format!("missing column `{missing}`")));
            }
        }
        Ok(table)
    }
}

/// Per-column mean over runs.
pub fn aggregate_results(model: &str, runs: &[ResultsRow]) -> Result<ResultsRow> {
    let first = runs.first().ok_or_else(|| Error::InsufficientData("no runs to aggregate".into()))?;
    if let Some(r) = runs.iter().find(|r| r.columns != first.columns) {
        return Err(Error::Schema(format!("run columns {:?} differ from {:?}", r.columns, first.columns)));
    }
    let n = runs.len() as f64;
    let values = (0..first.columns.len()).map(|c| runs.iter().map(|r| r.values[c]).sum::<f64>() / n).collect();
    Ok(ResultsRow { model: model.to_string(), columns: first.columns.clone(), values })
}

/// `r(baseline) - r(candidate)` per column; positive means performance lost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoEReport {
    pub baseline: String,
    pub candidate: String,
    pub columns: Vec<String>,
    pub costs: Vec<f64>,
    pub average: f64,
}

impl CoEReport {
    pub fn get(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|i| self.costs[i])
    }

    /// Two-decimal presentation of each cost.
    pub fn rounded(&self) -> Vec<String> {
        self.costs.iter().map(|&c| fmt2(c)).collect()
    }

    /// CSV with unrounded and two-decimal rows.
    pub fn to_csv(&self, provenance: &Provenance) -> Result<String> {
        let mut out = Vec::new();
        provenance.write_comment(&mut out)?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let mut header = vec!["model".to_string(), "presentation".to_string()];
            header.extend(self.columns.iter().cloned());
            header.push("avg".into());
            w.write_record(&header)?;
            let name = format!("CoE_{}", self.candidate);
            let mut full = vec![name.clone(), "unrounded".into()];
            full.extend(self.costs.iter().map(|c| format!("{c}")));
            full.push(format!("{}", self.average));
            w.write_record(&full)?;
            let mut short = vec![name, "2dp".into()];
            short.extend(self.rounded());
            short.push(fmt2(self.average));
            w.write_record(&short)?;
            w.flush()?;
        }
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }
}

pub fn cost_of_explainability(baseline: &ResultsRow, candidate: &ResultsRow) -> Result<CoEReport> {
    if baseline.columns != candidate.columns {
        return Err(Error::Schema(format!(
            "columns of `{}` {:?} differ from `{}` {:?}",
            baseline.model, baseline.columns, candidate.model, candidate.columns
        )));
    }
    let costs: Vec<f64> = baseline.values.iter().zip(&candidate.values).map(|(b, c)| b - c).collect();
    let average = costs.iter().sum::<f64>() / costs.len() as f64;
    Ok(CoEReport {
        baseline: baseline.model.clone(),
        candidate: candidate.model.clone(),
        columns: baseline.columns.clone(),
        costs,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::EMOTION_NAMES;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::Dimension(_))));
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::DegenerateCorrelation(_))));
        assert_eq!(pearson_or_zero(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), (0.0, true));
    }

    #[test]
    fn aggregate_mean() {
        let a = ResultsRow::new("m", &["x"], vec![0.6]).unwrap();
        let b = ResultsRow::new("m", &["x"], vec![0.8]).unwrap();
        assert!((aggregate_results("m", &[a.clone(), b]).unwrap().values[0] - 0.7).abs() < 1e-15);
        assert_eq!(aggregate_results("m", &[a.clone()]).unwrap().values, a.values);
        let c = ResultsRow::new("m", &["y"], vec![0.8]).unwrap();
        assert!(matches!(aggregate_results("m", &[a, c]), Err(Error::Schema(_))));
    }

    #[test]
    fn csv_round_trip_and_missing_column() {
        let row = ResultsRow::new("A2E", &EMOTION_NAMES, vec![0.81, 0.79, 0.84, 0.82, 0.81, 0.66, 0.6, 0.75]).unwrap();
        let t = ResultsTable::new(Provenance::new("h", 3), vec![row.clone()]).unwrap();
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("# config_hash=h seed=3\n"));
        let back = ResultsTable::from_csv(&csv, Some(&EMOTION_NAMES)).unwrap();
        assert_eq!(back.provenance, t.provenance);
        assert_eq!(back.rows[0].values, row.values);

        let broken = csv.replace(",fear", ",fearr");
        let err = ResultsTable::from_csv(&broken, Some(&EMOTION_NAMES)).unwrap_err();
        assert!(err.to_string().contains("fear"), "{err}");
    }

    #[test]
    fn coe_identity_and_mismatch() {
        let row = ResultsRow::new("A", &["x", "y"], vec![0.5, 0.25]).unwrap();
        let c = cost_of_explainability(&row, &row).unwrap();
        assert_eq!(c.costs, vec![0.0, 0.0]);
        let other = ResultsRow::new("B", &["x", "z"], vec![0.5, 0.25]).unwrap();
        assert!(matches!(cost_of_explainability(&row, &other), Err(Error::Schema(_))));
    }
}
