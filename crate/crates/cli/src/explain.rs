//! `xemo explain`: effects, distributions, correlations and per-song reports.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use xemo_core::explain::{
    compute_effects, correlation_matrix, effects_distribution, fit_ols, profile_table, select_contrast_pair, song_report, svg,
    weights_csv, FeatureSource, LinearMap, PairMode, PairReport, SongReport,
};
use xemo_core::features::{EMOTION_NAMES, MIDLEVEL_NAMES};
use xemo_core::models::load_checkpoint;
use xemo_core::train::{predict_examples, Scheme};
use xemo_core::{Error, Provenance};

use crate::config::Loaded;
use crate::results::{checkpoint_scheme, stored_linear_map};
use crate::workspace::{examples_for, write_if_changed, Layout, Tables};
use crate::Format;

pub struct Request<'a> {
    pub checkpoint: Option<&'a Path>,
    pub songs: &'a [String],
    pub pair_mode: Option<PairMode>,
    pub top_k: usize,
    pub format: Format,
}

/// The linear layer being explained and the mid-level values fed into it, one row per song.
struct Explained {
    name: String,
    map: LinearMap,
    ids: Vec<String>,
    features: Vec<Vec<f64>>,
    source: FeatureSource,
}

fn from_annotations(tables: &Tables) -> Result<Explained> {
    let (emotion, midlevel) = (tables.emotion()?, tables.midlevel()?);
    let ids: Vec<String> = emotion.ids().iter().filter(|id| midlevel.contains(id)).cloned().collect();
    let features = midlevel.select(&ids)?;
    let map = fit_ols(&features, &emotion.select(&ids)?, &MIDLEVEL_NAMES, &EMOTION_NAMES)?;
    Ok(Explained { name: "mid2e".into(), map, ids, features, source: FeatureSource::Annotations })
}

fn from_checkpoint(layout: &Layout, loaded: &Loaded, tables: &Tables, path: &Path) -> Result<Explained> {
    let (model, desc, _) = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    let scheme = checkpoint_scheme(&desc.metadata)?;
    let map = match scheme {
        Scheme::Joint => model.joint_linear().ok_or_else(|| Error::Config("joint checkpoint without a linear head".into()))?,
        Scheme::A2Mid2E => stored_linear_map(&desc.metadata)?,
        other => {
            return Err(Error::UnsupportedScheme(format!(
                "{} has no linear layer from mid-level features to emotions to explain",
                other.label()
            ))
            .into())
        }
    };
    let ids = tables.emotion()?.ids().to_vec();
    let examples = examples_for(layout, loaded, tables, &ids)?;
    let refs: Vec<_> = examples.iter().collect();
    let features = predict_examples(&model, &refs, loaded.crop(), 8)?
        .midlevel
        .ok_or_else(|| Error::UnsupportedScheme("checkpoint has no mid-level output".into()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
    Ok(Explained { source: FeatureSource::Predictions { model: name.clone() }, name, map, ids, features })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

pub fn run(loaded: &Loaded, req: &Request) -> Result<()> {
    let layout = Layout::new(loaded);
    let tables = Tables::load(loaded)?;
    let ex = match req.checkpoint {
        Some(p) => from_checkpoint(&layout, loaded, &tables, p)?,
        None => from_annotations(&tables)?,
    };
    for id in req.songs {
        if !ex.ids.contains(id) {
            return Err(Error::Lookup(format!("song `{id}` is not among the {} explained songs", ex.ids.len())).into());
        }
    }
    let prov: Provenance = loaded.provenance();
    let dir = layout.explain().join(&ex.name);
    let emotion = tables.emotion()?;
    let annotated = emotion.select(&ex.ids)?;

    let effects = compute_effects(&ex.map, &ex.features, &ex.ids, ex.source.clone())?;
    let dist = effects_distribution(&effects)?;
    let features: Vec<&str> = ex.map.features.iter().map(String::as_str).collect();
    let targets: Vec<&str> = ex.map.targets.iter().map(String::as_str).collect();
    let corr = correlation_matrix(&ex.features, &annotated, &features, &targets)?;
    let mut written = 0usize;
    let mut put = |name: &str, text: String| -> Result<()> {
        written += usize::from(write_if_changed(&dir.join(name), text)?);
        Ok(())
    };
    match req.format {
        Format::Json => {
            put("effects.json", json(&effects)?)?;
            put("boxplot.json", json(&dist)?)?;
            put("correlation.json", json(&corr)?)?;
            put("weights.json", json(&ex.map)?)?;
        }
        _ => {
            put("effects.csv", effects.to_csv(&prov)?)?;
            put("boxplot.csv", dist.to_csv(&prov)?)?;
            put("correlation.csv", corr.to_csv(&prov)?)?;
            put("weights.csv", weights_csv(&ex.map, &prov)?)?;
        }
    }
    if req.format == Format::Svg {
        put("boxplot.svg", svg::effects_svg(&dist))?;
        put("correlation.svg", svg::correlation_svg(&corr))?;
        put("weights.svg", svg::weights_svg(&ex.map))?;
    }

    let report = |id: &str| -> Result<SongReport> {
        Ok(song_report(id, &effects, emotion.get(id), req.top_k, &prov)?)
    };
    let mut reports = Vec::new();
    for id in req.songs {
        let r = report(id)?;
        put(&format!("song_{id}.json"), r.to_json()? + "\n")?;
        put(&format!("song_{id}.txt"), r.to_text())?;
        print!("{}", r.to_text());
        reports.push(r);
    }
    if !reports.is_empty() {
        let table = profile_table(&reports);
        put("profile.txt", table.clone())?;
        print!("{table}");
    }
    if let Some(mode) = req.pair_mode {
        let pair = select_contrast_pair(&annotated, &ex.features, mode)?;
        let songs = [ex.ids[pair.i].clone(), ex.ids[pair.j].clone()];
        let reports = vec![report(&songs[0])?, report(&songs[1])?];
        let table = profile_table(&reports);
        println!(
            "pair ({mode}): {} and {}; scaled emotion distance {:.3}, scaled mid-level distance {:.3}",
            songs[0], songs[1], pair.d_e_scaled, pair.d_mid_scaled
        );
        print!("{table}");
        put(&format!("pair_{mode}.json"), json(&PairReport { provenance: prov.clone(), pair, songs, reports })?)?;
        put(&format!("pair_{mode}.txt"), table)?;
    }
    eprintln!("explanation of {} over {} songs in {} ({written} files written)", ex.name, ex.ids.len(), dir.display());
    Ok(())
}
