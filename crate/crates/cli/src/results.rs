//! `xemo eval`, `xemo coe` and `xemo report`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use xemo_core::eval::{cost_of_explainability, CoEReport, ResultsRow, ResultsTable};
use xemo_core::explain::LinearMap;
use xemo_core::models::load_checkpoint;
use xemo_core::train::{predict_a2mid2e, predict_examples, score_columns, Scheme};
use xemo_core::{Error, Provenance};

use crate::config::Loaded;
use crate::workspace::{examples_for, write_if_changed, Layout, Tables};
use crate::{CliError, Format};

/// Scheme recorded in a checkpoint's metadata.
pub fn checkpoint_scheme(metadata: &serde_json::Value) -> Result<Scheme> {
    let key = metadata["scheme"]
        .as_str()
        .ok_or_else(|| CliError::Validation("checkpoint metadata names no scheme".into()))?;
    Ok(key.parse()?)
}

/// The stage-2 map stored with a two-stage checkpoint.
pub fn stored_linear_map(metadata: &serde_json::Value) -> Result<LinearMap> {
    let map: LinearMap = serde_json::from_value(metadata["linear_map"].clone())
        .map_err(|e| CliError::Validation(format!("checkpoint carries no usable linear map: {e}")))?;
    map.validate()?;
    Ok(map)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            write_if_changed(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn table_text(table: &ResultsTable, format: Format) -> Result<String> {
    Ok(match format {
        Format::Json => table.to_json()? + "\n",
        _ => table.to_csv()?,
    })
}

pub fn eval(loaded: &Loaded, checkpoint: &Path, songs: &[String], format: Format) -> Result<()> {
    let layout = Layout::new(loaded);
    let tables = Tables::load(loaded)?;
    let (model, desc, _) = load_checkpoint(checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
    let scheme = checkpoint_scheme(&desc.metadata)?;
    let ids: Vec<String> = if songs.is_empty() {
        serde_json::from_value(desc.metadata["test_ids"].clone())
            .map_err(|_| CliError::Usage("checkpoint records no test songs; pass --songs".into()))?
    } else {
        songs.to_vec()
    };
    let examples = examples_for(&layout, loaded, &tables, &ids)?;
    let refs: Vec<_> = examples.iter().collect();
    let crop = loaded.crop();
    let predictions = match scheme {
        Scheme::A2Mid2E => predict_a2mid2e(&model, &stored_linear_map(&desc.metadata)?, &refs, crop)?,
        _ => {
            let p = predict_examples(&model, &refs, crop, 8)?;
            (if scheme.predicts_emotion() { p.emotion } else { p.midlevel })
                .ok_or_else(|| Error::UnsupportedScheme(format!("checkpoint has no output for {}", scheme.label())))?
        }
    };
    let targets = refs
        .iter()
        .map(|e| {
            (if scheme.predicts_emotion() { e.emotion.clone() } else { e.midlevel.clone() })
                .ok_or_else(|| Error::Lookup(format!("song `{}` has no {} annotations", e.id, scheme.columns()[0])))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scores = score_columns(&predictions, &targets)?;
    let row = ResultsRow::new(scheme.label(), scheme.columns(), scores.r)?;
    let table = ResultsTable::new(loaded.provenance(), vec![row])?;
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let ext = if format == Format::Json { "json" } else { "csv" };
    let text = table_text(&table, format)?;
    write_if_changed(&layout.results().join(format!("eval_{stem}.{ext}")), &text)?;
    print!("{text}");
    Ok(())
}

fn pick<'a>(table: &'a ResultsTable, model: Option<&str>, path: &Path) -> Result<&'a ResultsRow> {
    match model {
        Some(m) => table
            .row(m)
            .ok_or_else(|| Error::Lookup(format!("no row `{m}` in {}", path.display())).into()),
        None => table.rows.first().ok_or_else(|| Error::EmptyTable.into()),
    }
}

#[derive(Serialize)]
struct CoEJson<'a> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    report: &'a CoEReport,
}

pub fn coe(
    baseline: &Path,
    candidate: &Path,
    baseline_row: Option<&str>,
    candidate_row: Option<&str>,
    format: Format,
    out: Option<&Path>,
) -> Result<()> {
    let load = |p: &Path, expected: Option<&[&str]>| {
        ResultsTable::load(p, expected).with_context(|| format!("reading {}", p.display()))
    };
    let base = load(baseline, None)?;
    let columns: Vec<&str> = base.columns.iter().map(String::as_str).collect();
    let cand = load(candidate, Some(&columns))?;
    let report = cost_of_explainability(pick(&base, baseline_row, baseline)?, pick(&cand, candidate_row, candidate)?)?;
    let provenance = if base.provenance == cand.provenance {
        base.provenance.clone()
    } else {
        Provenance::new(format!("{}+{}", base.provenance.config_hash, cand.provenance.config_hash), base.provenance.seed)
    };
    let text = match format {
        Format::Csv => report.to_csv(&provenance)?,
        Format::Json => serde_json::to_string_pretty(&CoEJson { provenance: &provenance, report: &report })? + "\n",
        Format::Svg => bail!(CliError::Usage("coe writes csv or json".into())),
    };
    emit(out, &text)
}

/// Table of every trained scheme's mean row, plus cost rows against A2E.
pub fn report(loaded: &Loaded, format: Format) -> Result<()> {
    let layout = Layout::new(loaded);
    let read = |s: Scheme| -> Result<Option<ResultsRow>> {
        let path = layout.results().join(format!("{}.json", s.key()));
        if !path.exists() {
            return Ok(None);
        }
        let t = ResultsTable::load(&path, Some(s.columns()))?;
        Ok(t.rows.into_iter().next())
    };
    let mut written = Vec::new();
    for (name, schemes) in [
        ("emotion", &[Scheme::A2E, Scheme::A2Mid2E, Scheme::Joint, Scheme::Mid2E][..]),
        ("midlevel", &[Scheme::A2Mid, Scheme::A2MidPlus][..]),
    ] {
        let mut rows = Vec::new();
        for &s in schemes {
            if let Some(r) = read(s)? {
                rows.push(r);
            }
        }
        if rows.is_empty() {
            continue;
        }
        if let Some(base) = rows.iter().find(|r| r.model == Scheme::A2E.label()).cloned() {
            for cand in [Scheme::A2Mid2E, Scheme::Joint] {
                if let Some(c) = rows.iter().find(|r| r.model == cand.label()).cloned() {
                    let coe = cost_of_explainability(&base, &c)?;
                    rows.push(ResultsRow::new(format!("CoE_{}", cand.label()), &EMOTION_COLUMNS, coe.costs)?);
                }
            }
        }
        let table = ResultsTable::new(loaded.provenance(), rows)?;
        let ext = if format == Format::Json { "json" } else { "csv" };
        let text = table_text(&table, format)?;
        write_if_changed(&layout.results().join(format!("table_{name}.{ext}")), &text)?;
        print!("{text}");
        written.push(name);
    }
    if written.is_empty() {
        bail!(CliError::Validation(format!("no results under {}; run `xemo train` first", layout.results().display())));
    }
    Ok(())
}

const EMOTION_COLUMNS: [&str; 8] = xemo_core::features::EMOTION_NAMES;
