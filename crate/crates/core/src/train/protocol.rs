use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{hold_out, AnnotationTable, make_splits, validation_split, Split};
use crate::error::{Error, Result};
use crate::eval::{aggregate_results, ResultsRow};
use crate::explain::{fit_ols, LinearMap};
use crate::features::{EMOTION_NAMES, MIDLEVEL_NAMES};
use crate::models::{build_model, save_checkpoint, Architecture, SchemeModel, TrunkConfig};
use crate::train::dataset::{Dataset, Example};
use crate::train::learner::{predict_examples, score_columns, CropSpec, NetLearner, TrainingConfig};
use crate::train::{fit, EpochRecord, FitSummary, StopRule};

/// An experimental scheme of the evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    A2E,
    A2Mid2E,
    Joint,
    A2Mid,
    A2MidPlus,
    Mid2E,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [Scheme::A2E, Scheme::A2Mid2E, Scheme::Joint, Scheme::A2Mid, Scheme::A2MidPlus, Scheme::Mid2E];

    /// Name used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::A2E => "A2E",
            Scheme::A2Mid2E => "A2Mid2E",
            Scheme::Joint => "A2Mid2E-Joint",
            Scheme::A2Mid => "A2Mid",
            Scheme::A2MidPlus => "A2Mid+",
            Scheme::Mid2E => "Mid2E",
        }
    }

    /// Name used on the command line and in file names.
    pub fn key(self) -> &'static str {
        match self {
            Scheme::A2E => "a2e",
            Scheme::A2Mid2E => "a2mid2e",
            Scheme::Joint => "joint",
            Scheme::A2Mid => "a2mid",
            Scheme::A2MidPlus => "a2mid-plus",
            Scheme::Mid2E => "mid2e",
        }
    }

    /// Whether the scheme's targets are the emotions (otherwise the mid-level features).
    pub fn predicts_emotion(self) -> bool {
        matches!(self, Scheme::A2E | Scheme::A2Mid2E | Scheme::Joint | Scheme::Mid2E)
    }

    pub fn columns(self) -> &'static [&'static str] {
        if self.predicts_emotion() {
            &EMOTION_NAMES
        } else {
            &MIDLEVEL_NAMES
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let k = s.to_ascii_lowercase();
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.key() == k || sc.label().to_ascii_lowercase() == k)
            .ok_or_else(|| {
                let valid: Vec<&str> = Scheme::ALL.iter().map(|s| s.key()).collect();
                Error::UnsupportedScheme(format!("`{s}`; valid schemes: {}", valid.join(", ")))
            })
    }
}

/// Both datasets of the protocol. `soundtracks` carries emotion annotations
/// and, where available, mid-level annotations; `midlevel` is the large
/// mid-level corpus.
#[derive(Debug, Clone, Default)]
pub struct ProtocolData {
    pub soundtracks: Dataset,
    pub midlevel: Option<Dataset>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub training: TrainingConfig,
    pub trunk: TrunkConfig,
    pub crop: CropSpec,
    pub runs: usize,
    pub base_seed: u64,
    pub test_ratio: f64,
    /// Test share of the single A2Mid+ split.
    pub plus_test_ratio: f64,
    pub jobs: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub log_dir: Option<PathBuf>,
    /// Embedded into checkpoints.
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scheme: Scheme,
    pub run: usize,
    pub seed: u64,
    pub columns: Vec<String>,
    pub r: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub epochs: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub checkpoint: Option<PathBuf>,
    pub linear_map: Option<LinearMap>,
    pub test_ids: Vec<String>,
}

impl RunResult {
    pub fn row(&self) -> ResultsRow {
        ResultsRow { model: self.scheme.label().to_string(), columns: self.columns.clone(), values: self.r.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub scheme: Scheme,
    pub runs: Vec<RunResult>,
    pub mean: ResultsRow,
}

/// Song ids the scheme is split over.
fn split_population(scheme: Scheme, data: &ProtocolData) -> Result<Vec<String>> {
    Ok(match scheme {
        Scheme::A2E | Scheme::A2Mid2E => data.soundtracks.ids_with(false, true),
        Scheme::Joint | Scheme::Mid2E | Scheme::A2Mid => data.soundtracks.ids_with(true, true),
        Scheme::A2MidPlus => midlevel_corpus(data)?.ids_with(true, false),
    })
}

fn midlevel_corpus(data: &ProtocolData) -> Result<&Dataset> {
    data.midlevel.as_ref().ok_or_else(|| Error::Config("this scheme needs the mid-level dataset".into()))
}

/// The train/test splits the protocol uses for `scheme`.
pub fn protocol_splits(scheme: Scheme, data: &ProtocolData, cfg: &ProtocolConfig) -> Result<Vec<Split>> {
    splits_for_population(scheme, &split_population(scheme, data)?, cfg)
}

/// The splits of `scheme` over an explicit population of song ids.
///
/// The population is the songs with emotion annotations for A2E and A2Mid2E,
/// songs with both annotations for Joint, Mid2E and A2Mid, and the mid-level
/// corpus for A2Mid+.
pub fn splits_for_population(scheme: Scheme, ids: &[String], cfg: &ProtocolConfig) -> Result<Vec<Split>> {
    if scheme == Scheme::A2MidPlus {
        let (train_ids, test_ids) = hold_out(ids, cfg.plus_test_ratio, cfg.base_seed)?;
        return Ok(vec![Split { seed: cfg.base_seed, ratio: cfg.plus_test_ratio, train_ids, test_ids }]);
    }
    make_splits(ids, cfg.test_ratio, cfg.base_seed, cfg.runs)
}

fn log_writer(cfg: &ProtocolConfig, name: &str) -> Result<Option<BufWriter<File>>> {
    match &cfg.log_dir {
        None => Ok(None),
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?)))
        }
    }
}

/// Trains `architecture` on `train_ids`, holding out a validation share by the run seed.
pub fn train_network(
    architecture: Architecture,
    dataset: &Dataset,
    train_ids: &[String],
    cfg: &ProtocolConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SchemeModel<f32>, FitSummary)> {
    let (fit_ids, val_ids) = validation_split(train_ids, cfg.training.validation_fraction, seed)?;
    let model = build_model::<f32>(architecture, &cfg.trunk, seed)?;
    let mut learner = NetLearner::new(
        model,
        dataset.select(&fit_ids)?,
        dataset.select(&val_ids)?,
        cfg.crop,
        &cfg.training,
        seed,
    )?;
    let summary = fit(
        &mut learner,
        StopRule { patience: cfg.training.patience, max_epochs: cfg.training.max_epochs },
        &mut on_epoch,
    )?;
    Ok((learner.into_model(), summary))
}

fn rows(examples: &[&Example], midlevel: bool) -> Result<Vec<Vec<f64>>> {
    examples
        .iter()
        .map(|e| {
            let v = if midlevel { &e.midlevel } else { &e.emotion };
            v.clone().ok_or_else(|| Error::Schema(format!("song `{}` lacks annotations", e.id)))
        })
        .collect()
}

/// Two-stage mid-level then linear model.
///
/// Stage 1 trains the mid-level network on the mid-level corpus minus
/// `excluded_ids`; stage 2 fits least squares from its predictions on the
/// `train_ids` soundtrack songs to their emotion annotations.
pub fn train_a2mid2e(
    data: &ProtocolData,
    train_ids: &[String],
    excluded_ids: &[String],
    cfg: &ProtocolConfig,
    seed: u64,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(SchemeModel<f32>, LinearMap, FitSummary)> {
    let corpus = midlevel_corpus(data)?;
    let corpus_ids = corpus.ids();
    let missing: Vec<String> = train_ids
        .iter()
        .chain(excluded_ids)
        .filter(|id| corpus_ids.binary_search(id).is_err())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join { missing });
    }
    let stage1_ids: Vec<String> = corpus
        .ids_with(true, false)
        .into_iter()
        .filter(|id| excluded_ids.binary_search(id).is_err())
        .collect();
    let (model, summary) = train_network(Architecture::A2Mid, corpus, &stage1_ids, cfg, seed, on_epoch)?;
    let train = data.soundtracks.select(train_ids)?;
    let map = fit_stage2(&model, &train, cfg.crop)?;
    Ok((model, map, summary))
}

/// Least squares from the network's mid-level predictions to emotion annotations.
pub fn fit_stage2(model: &SchemeModel<f32>, train: &[&Example], crop: CropSpec) -> Result<LinearMap> {
    let mid = predict_examples(model, train, crop, 8)?
        .midlevel
        .ok_or_else(|| Error::UnsupportedScheme("stage-1 model has no mid-level output".into()))?;
    fit_ols(&mid, &rows(train, false)?, &MIDLEVEL_NAMES, &EMOTION_NAMES)
}

/// Emotion predictions of a two-stage model: the linear map applied to the network's mid-level outputs.
pub fn predict_a2mid2e(model: &SchemeModel<f32>, map: &LinearMap, examples: &[&Example], crop: CropSpec) -> Result<Vec<Vec<f64>>> {
    let mid = predict_examples(model, examples, crop, 8)?
        .midlevel
        .ok_or_else(|| Error::UnsupportedScheme("stage-1 model has no mid-level output".into()))?;
    mid.iter().map(|m| map.apply(m)).collect()
}

fn run_one(scheme: Scheme, data: &ProtocolData, cfg: &ProtocolConfig, run: usize, split: &Split) -> Result<RunResult> {
    let name = format!("{}_run{run:02}", scheme.key());
    let mut log = log_writer(cfg, &name)?;
    let mut log_err: Option<std::io::Error> = None;
    let mut on_epoch = |r: &EpochRecord| {
        if let Some(w) = log.as_mut() {
            if let Err(e) = serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from).and_then(|_| writeln!(w)) {
                log_err.get_or_insert(e);
            }
        }
    };
    let seed = split.seed;
    let test = data.soundtracks_or_corpus(scheme)?.select(&split.test_ids)?;

    let mut result = RunResult {
        scheme,
        run,
        seed,
        columns: scheme.columns().iter().map(|s| s.to_string()).collect(),
        r: Vec::new(),
        degenerate: Vec::new(),
        epochs: None,
        best_val_loss: None,
        checkpoint: None,
        linear_map: None,
        test_ids: split.test_ids.clone(),
    };

    let (predictions, model, summary) = match scheme {
        Scheme::Mid2E => {
            let train = data.soundtracks.select(&split.train_ids)?;
            let (map, preds) = mid2e_fit_predict(&rows(&train, true)?, &rows(&train, false)?, &rows(&test, true)?)?;
            result.linear_map = Some(map);
            (preds, None, None)
        }
        Scheme::A2Mid2E => {
            let (model, map, summary) = train_a2mid2e(data, &split.train_ids, &split.test_ids, cfg, seed, &mut on_epoch)?;
            let preds = predict_a2mid2e(&model, &map, &test, cfg.crop)?;
            result.linear_map = Some(map);
            (preds, Some(model), Some(summary))
        }
        Scheme::A2E | Scheme::Joint | Scheme::A2Mid | Scheme::A2MidPlus => {
            let arch = match scheme {
                Scheme::A2E => Architecture::A2E,
                Scheme::Joint => Architecture::Joint,
                _ => Architecture::A2Mid,
            };
            let dataset = data.soundtracks_or_corpus(scheme)?;
            let (model, summary) = train_network(arch, dataset, &split.train_ids, cfg, seed, &mut on_epoch)?;
            let p = predict_examples(&model, &test, cfg.crop, 8)?;
            let preds = if scheme.predicts_emotion() { p.emotion } else { p.midlevel };
            if scheme == Scheme::Joint {
                result.linear_map = model.joint_linear();
            }
            (preds.expect("architecture provides the scheme's outputs"), Some(model), Some(summary))
        }
    };
    if let Some(w) = log.as_mut() {
        w.flush()?;
    }
    if let Some(e) = log_err {
        return Err(e.into());
    }

    let targets = rows(&test, !scheme.predicts_emotion())?;
    let scores = score_columns(&predictions, &targets)?;
    result.r = scores.r;
    result.degenerate = scores.degenerate;
    if let Some(s) = summary {
        result.epochs = Some(s.epochs);
        result.best_val_loss = Some(s.best_val_loss);
    }
    if let (Some(model), Some(dir)) = (model, &cfg.checkpoint_dir) {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{name}.ckpt"));
        let mut meta = cfg.metadata.clone();
        if !meta.is_object() {
            meta = serde_json::json!({});
        }
        meta["scheme"] = serde_json::json!(scheme.key());
        meta["run"] = serde_json::json!(run);
        meta["seed"] = serde_json::json!(seed);
        meta["test_ids"] = serde_json::json!(split.test_ids);
        if scheme == Scheme::A2Mid2E {
            meta["linear_map"] = serde_json::to_value(&result.linear_map)?;
        }
        save_checkpoint(&model, None, meta, &path)?;
        result.checkpoint = Some(path);
    }
    Ok(result)
}

fn mid2e_fit_predict(train_mid: &[Vec<f64>], train_emo: &[Vec<f64>], test_mid: &[Vec<f64>]) -> Result<(LinearMap, Vec<Vec<f64>>)> {
    let map = fit_ols(train_mid, train_emo, &MIDLEVEL_NAMES, &EMOTION_NAMES)?;
    let preds = test_mid.iter().map(|m| map.apply(m)).collect::<Result<Vec<_>>>()?;
    Ok((map, preds))
}

/// The Mid2E protocol from annotations alone: least squares from ground-truth
/// mid-level ratings to emotion ratings over seeded splits of the songs in both tables.
pub fn mid2e_protocol(
    midlevel: &AnnotationTable,
    emotion: &AnnotationTable,
    runs: usize,
    base_seed: u64,
    test_ratio: f64,
) -> Result<ProtocolResult> {
    let ids: Vec<String> = emotion.ids().iter().filter(|id| midlevel.contains(id)).cloned().collect();
    let splits = make_splits(&ids, test_ratio, base_seed, runs)?;
    let mut results = Vec::with_capacity(splits.len());
    for (run, split) in splits.iter().enumerate() {
        let (map, preds) =
            mid2e_fit_predict(&midlevel.select(&split.train_ids)?, &emotion.select(&split.train_ids)?, &midlevel.select(&split.test_ids)?)?;
        let scores = score_columns(&preds, &emotion.select(&split.test_ids)?)?;
        results.push(RunResult {
            scheme: Scheme::Mid2E,
            run,
            seed: split.seed,
            columns: EMOTION_NAMES.iter().map(|s| s.to_string()).collect(),
            r: scores.r,
            degenerate: scores.degenerate,
            epochs: None,
            best_val_loss: None,
            checkpoint: None,
            linear_map: Some(map),
            test_ids: split.test_ids.clone(),
        });
    }
    let mean = aggregate_results(Scheme::Mid2E.label(), &results.iter().map(RunResult::row).collect::<Vec<_>>())?;
    Ok(ProtocolResult { scheme: Scheme::Mid2E, runs: results, mean })
}

impl ProtocolData {
    fn soundtracks_or_corpus(&self, scheme: Scheme) -> Result<&Dataset> {
        if scheme == Scheme::A2MidPlus {
            midlevel_corpus(self)
        } else {
            Ok(&self.soundtracks)
        }
    }
}

/// Runs the full protocol for one scheme: one result per split and their mean.
///
/// `on_run` sees each completed run as soon as it finishes, so callers can
/// persist partial results. The first failing run (by index) aborts the protocol.
pub fn run_protocol(
    scheme: Scheme,
    data: &ProtocolData,
    cfg: &ProtocolConfig,
    on_run: &(dyn Fn(&RunResult) + Sync),
) -> Result<ProtocolResult> {
    cfg.training.validate()?;
    cfg.trunk.validate()?;
    let splits = protocol_splits(scheme, data, cfg)?;
    let results: Vec<Result<RunResult>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let lock = Mutex::new(());
        pool.install(|| {
            splits
                .par_iter()
                .enumerate()
                .map(|(k, split)| {
                    let r = run_one(scheme, data, cfg, k, split)?;
                    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
                    on_run(&r);
                    Ok(r)
                })
                .collect()
        })
    } else {
        let mut out = Vec::with_capacity(splits.len());
        for (k, split) in splits.iter().enumerate() {
            let r = run_one(scheme, data, cfg, k, split);
            let failed = r.is_err();
            if let Ok(ok) = &r {
                on_run(ok);
            }
            out.push(r);
            if failed {
                break;
            }
        }
        out
    };
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mean = aggregate_results(scheme.label(), &runs.iter().map(RunResult::row).collect::<Vec<_>>())?;
    Ok(ProtocolResult { scheme, runs, mean })
}
