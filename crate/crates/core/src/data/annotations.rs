//! Annotation CSV ingestion.
//!
//! Files are UTF-8 CSV with a header `song_id,<columns...>`. Column names
//! must be exactly the schema's names (case-insensitive, any order). Raw
//! ratings are range-checked and stored multiplied by 0.1.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{Schema, RATING_SCALE};

/// Slack for raw values produced by re-serializing scaled annotations.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    schema: Schema,
    ids: Vec<String>,
    /// Row-major, `ids.len() x schema.width()`, already scaled.
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl AnnotationTable {
    /// Builds a table from already scaled rows.
    pub fn from_rows(schema: Schema, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyTable);
        }
        let width = schema.width();
        let mut ids = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len() * width);
        let mut index = HashMap::with_capacity(rows.len());
        for (row, (id, vals)) in rows.into_iter().enumerate() {
            if vals.len() != width {
                return Err(Error::Schema(format!("row {} has {} values, expected {width}", row + 1, vals.len())));
            }
            if let Some((col, v)) = vals.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Parse {
                    row: row + 1,
                    column: schema.columns()[col].into(),
                    message: format!("non-finite value {v}"),
                });
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::Duplicate(id));
            }
            ids.push(id);
            values.extend(vals);
        }
        Ok(AnnotationTable { schema, ids, values, index })
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        let w = self.schema.width();
        self.index.get(id).map(|&r| &self.values[r * w..(r + 1) * w])
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.schema.width();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.len()).map(|r| self.row(r)[c]).collect()
    }

    /// Rows for `ids`, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<Vec<f64>>> {
        ids.iter()
            .map(|id| self.get(id).map(<[f64]>::to_vec).ok_or_else(|| Error::Lookup(id.clone())))
            .collect()
    }

    /// Writes raw (unscaled) ratings in the same CSV layout the loader reads.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["song_id".to_string()];
        header.extend(self.schema.columns().iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for (r, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(r).iter().map(|v| format!("{}", v / RATING_SCALE)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loads and validates an annotation CSV, scaling raw ratings by 0.1.
pub fn load_annotations(path: impl AsRef<Path>, schema: Schema) -> Result<AnnotationTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let header = reader.headers()?.clone();
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names.first().map(String::as_str) != Some("song_id") {
        return Err(Error::Schema("first column must be `song_id`".into()));
    }
    let expected = schema.columns();
    let mut positions = Vec::with_capacity(expected.len());
    for col in expected {
        match names.iter().skip(1).position(|n| n == col) {
            Some(p) => positions.push(p + 1),
            None => return Err(Error::Schema(format!("missing column `{col}`"))),
        }
    }
    if let Some(extra) = names.iter().skip(1).find(|n| !expected.contains(&n.as_str())) {
        return Err(Error::Schema(format!("unexpected column `{extra}`")));
    }
    if names.len() != expected.len() + 1 {
        return Err(Error::Schema("duplicated column in header".into()));
    }

    let (min, max) = schema.raw_range();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Schema(format!("row {row} has {} fields, expected {}", rec.len(), names.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::Parse { row, column: "song_id".into(), message: "empty song id".into() });
        }
        let mut vals = Vec::with_capacity(expected.len());
        for (col, &pos) in expected.iter().zip(&positions) {
            let cell = &rec[pos];
            let raw: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col.to_string(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !raw.is_finite() || raw < min - RANGE_SLACK || raw > max + RANGE_SLACK {
                return Err(Error::OutOfRange { row, column: col.to_string(), value: raw, min, max });
            }
            vals.push(raw * RATING_SCALE);
        }
        rows.push((id, vals));
    }
    AnnotationTable::from_rows(schema, rows)
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const MID_HEADER: &str =
        "song_id,melodiousness,articulation,rhythmic_stability,rhythmic_complexity,dissonance,tonal_stability,minorness\n";
    const EMO_HEADER: &str = "song_id,valence,energy,tension,anger,fear,happy,sad,tender\n";

    #[test]
    fn midlevel_ten_scales_to_one() {
        let f = write(&format!("{MID_HEADER}a,10,1,5,5,5,5,5\n"));
        let t = load_annotations(f.path(), Schema::Midlevel).unwrap();
        assert!((t.get("a").unwrap()[0] - 1.0).abs() < 1e-15);
        assert!((t.get("a").unwrap()[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn emotion_maximum_scales() {
        let f = write(&format!("{EMO_HEADER}x,7.83,1,2,3,4,5,6,7\n"));
        let t = load_annotations(f.path(), Schema::Emotion).unwrap();
        assert!((t.get("x").unwrap()[0] - 0.783).abs() < 1e-12);
    }

    #[test]
    fn header_only_is_empty_table() {
        let f = write(EMO_HEADER);
        assert!(matches!(load_annotations(f.path(), Schema::Emotion), Err(Error::EmptyTable)));
    }

    #[test]
    fn column_order_is_normalized() {
        let f = write("song_id,tender,sad,happy,fear,anger,tension,energy,valence\nq,1,2,3,4,5,6,7,7.5\n");
        let t = load_annotations(f.path(), Schema::Emotion).unwrap();
        let row = t.get("q").unwrap();
        assert!((row[0] - 0.75).abs() < 1e-12 && (row[7] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn schema_violations() {
        let missing = write("song_id,valence,energy,tension,anger,fear,happy,sad\na,1,1,1,1,1,1,1\n");
        match load_annotations(missing.path(), Schema::Emotion) {
            Err(Error::Schema(m)) => assert!(m.contains("tender"), "{m}"),
            other => panic!("{other:?}"),
        }
        let extra = write("song_id,valence,energy,tension,anger,fear,happy,sad,tender,speed\na,1,1,1,1,1,1,1,1,1\n");
        assert!(matches!(load_annotations(extra.path(), Schema::Emotion), Err(Error::Schema(_))));
    }

    #[test]
    fn bad_cells_report_location() {
        let f = write(&format!("{EMO_HEADER}a,1,1,1,1,1,1,1,1\nb,1,1,x,1,1,1,1,1\n"));
        match load_annotations(f.path(), Schema::Emotion) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "tension");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_and_range() {
        let dup = write(&format!("{EMO_HEADER}a,1,1,1,1,1,1,1,1\na,2,2,2,2,2,2,2,2\n"));
        assert!(matches!(load_annotations(dup.path(), Schema::Emotion), Err(Error::Duplicate(id)) if id == "a"));
        let high = write(&format!("{EMO_HEADER}a,7.9,1,1,1,1,1,1,1\n"));
        assert!(matches!(load_annotations(high.path(), Schema::Emotion), Err(Error::OutOfRange { .. })));
        let low = write(&format!("{MID_HEADER}a,0.5,1,1,1,1,1,1\n"));
        assert!(matches!(load_annotations(low.path(), Schema::Midlevel), Err(Error::OutOfRange { .. })));
        let mid_high = write(&format!("{MID_HEADER}a,10.5,1,1,1,1,1,1\n"));
        assert!(matches!(load_annotations(mid_high.path(), Schema::Midlevel), Err(Error::OutOfRange { .. })));
    }
}
