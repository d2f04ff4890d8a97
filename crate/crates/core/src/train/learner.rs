use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use xemo_nn::{AdamConfig, AdamState, Mode, NnRng, Tensor};

use crate::dsp::{Spectrogram, SpectrogramConfig};
use crate::error::{Error, Result};
use crate::eval::pearson_or_zero;
use crate::models::{batch_tensor, Architecture, SchemeModel, Targets};
use crate::train::dataset::{center_crop, random_crop, Example};
use crate::train::Learner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub validation_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { lr: 0.0005, batch_size: 8, patience: 50, max_epochs: 1000, validation_fraction: 0.1 }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("patience, batch_size and max_epochs must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!("validation_fraction {} not in (0, 1)", self.validation_fraction)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

/// How network inputs are cut from whole-song spectrograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    pub n_frames: usize,
    pub hop: usize,
    pub floor: f32,
}

impl From<&SpectrogramConfig> for CropSpec {
    fn from(c: &SpectrogramConfig) -> Self {
        CropSpec { n_frames: c.n_frames, hop: c.hop, floor: c.log_floor_db as f32 }
    }
}

fn target_tensor(examples: &[&Example], midlevel: bool) -> Result<Tensor<f32>> {
    let mut data = Vec::new();
    let mut width = 0;
    for ex in examples {
        let row = if midlevel { &ex.midlevel } else { &ex.emotion };
        let row = row.as_ref().ok_or_else(|| {
            Error::Schema(format!(
                "song `{}` has no {} annotation",
                ex.id,
                if midlevel { "mid-level" } else { "emotion" }
            ))
        })?;
        width = row.len();
        data.extend(row.iter().map(|&v| v as f32));
    }
    Ok(Tensor::from_vec(&[examples.len(), width], data)?)
}

/// Targets the architecture is trained on.
pub fn targets_for(architecture: Architecture, examples: &[&Example]) -> Result<Targets<f32>> {
    let mid = matches!(architecture, Architecture::A2Mid | Architecture::Joint);
    let emo = matches!(architecture, Architecture::A2E | Architecture::Joint);
    Ok(Targets {
        midlevel: if mid { Some(target_tensor(examples, true)?) } else { None },
        emotion: if emo { Some(target_tensor(examples, false)?) } else { None },
    })
}

/// Mini-batch Adam training of a [`SchemeModel`] on random crops.
pub struct NetLearner<'a> {
    pub model: SchemeModel<f32>,
    pub adam: AdamState<f32>,
    train: Vec<&'a Example>,
    val: Vec<&'a Example>,
    crop: CropSpec,
    batch_size: usize,
    rng: NnRng,
}

impl<'a> NetLearner<'a> {
    pub fn new(
        model: SchemeModel<f32>,
        train: Vec<&'a Example>,
        val: Vec<&'a Example>,
        crop: CropSpec,
        cfg: &TrainingConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        if val.is_empty() {
            return Err(Error::Config("empty validation set".into()));
        }
        if let Some(ex) = train.iter().find(|t| val.iter().any(|v| v.id == t.id)) {
            return Err(Error::Config(format!("song `{}` is in both training and validation sets", ex.id)));
        }
        let adam = AdamState::new(cfg.adam(), &model.params())?;
        Ok(NetLearner { model, adam, train, val, crop, batch_size: cfg.batch_size, rng: NnRng::seed_from_u64(seed) })
    }

    pub fn into_model(self) -> SchemeModel<f32> {
        self.model
    }
}

impl Learner for NetLearner<'_> {
    type Snapshot = SchemeModel<f32>;

    fn train_epoch(&mut self, _epoch: usize) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for chunk in order.chunks(self.batch_size) {
            let examples: Vec<&Example> = chunk.iter().map(|&i| self.train[i]).collect();
            let crops = examples
                .iter()
                .map(|ex| random_crop(ex, self.crop.n_frames, self.crop.hop, self.crop.floor, &mut self.rng))
                .collect::<Result<Vec<Spectrogram>>>()?;
            let input = batch_tensor(&crops.iter().collect::<Vec<_>>())?;
            let targets = targets_for(self.model.architecture(), &examples)?;
            let (loss, grads, pass) = self.model.loss_and_grads(&input, &targets, Mode::Train, Some(&mut self.rng))?;
            self.adam.step(self.model.params_mut(), &grads)?;
            self.model.update_running_stats(&pass);
            total += loss * examples.len() as f64;
        }
        Ok(total / self.train.len() as f64)
    }

    fn validation_loss(&mut self) -> Result<f64> {
        let mut total = 0.0;
        for chunk in self.val.chunks(self.batch_size) {
            let crops = chunk
                .iter()
                .map(|ex| center_crop(ex, self.crop.n_frames, self.crop.hop, self.crop.floor))
                .collect::<Result<Vec<Spectrogram>>>()?;
            let input = batch_tensor(&crops.iter().collect::<Vec<_>>())?;
            let targets = targets_for(self.model.architecture(), chunk)?;
            let (loss, _, _) = self.model.loss_and_grads(&input, &targets, Mode::Eval, None)?;
            total += loss * chunk.len() as f64;
        }
        Ok(total / self.val.len() as f64)
    }

    fn snapshot(&self) -> SchemeModel<f32> {
        self.model.clone()
    }

    fn restore(&mut self, snapshot: SchemeModel<f32>) {
        self.model = snapshot;
    }

    fn learning_rate(&self) -> f64 {
        self.adam.config.lr
    }
}

/// Eval-mode outputs on center crops, one row per example.
pub struct Predictions {
    pub midlevel: Option<Vec<Vec<f64>>>,
    pub emotion: Option<Vec<Vec<f64>>>,
}

pub fn predict_examples(model: &SchemeModel<f32>, examples: &[&Example], crop: CropSpec, batch: usize) -> Result<Predictions> {
    let mut mid: Option<Vec<Vec<f64>>> = None;
    let mut emo: Option<Vec<Vec<f64>>> = None;
    let rows = |t: &Tensor<f32>| -> Vec<Vec<f64>> {
        let w = t.shape()[1];
        t.data().chunks(w).map(|r| r.iter().map(|&v| v as f64).collect()).collect()
    };
    for chunk in examples.chunks(batch.max(1)) {
        let crops = chunk
            .iter()
            .map(|ex| center_crop(ex, crop.n_frames, crop.hop, crop.floor))
            .collect::<Result<Vec<Spectrogram>>>()?;
        let out = model.predict_batch(&batch_tensor(&crops.iter().collect::<Vec<_>>())?)?;
        if let Some(m) = &out.midlevel {
            mid.get_or_insert_with(Vec::new).extend(rows(m));
        }
        if let Some(e) = &out.emotion {
            emo.get_or_insert_with(Vec::new).extend(rows(e));
        }
    }
    Ok(Predictions { midlevel: mid, emotion: emo })
}

/// Per-column Pearson r between predictions and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub r: Vec<f64>,
    /// Columns where a constant prediction or target made r undefined (reported as 0).
    pub degenerate: Vec<bool>,
}

pub fn score_columns(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Scores> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension(format!("{} predictions for {} targets", predictions.len(), targets.len())));
    }
    if predictions.len() < 2 {
        return Err(Error::DegenerateCorrelation(format!("test set of {} songs", predictions.len())));
    }
    let width = targets[0].len();
    let mut r = Vec::with_capacity(width);
    let mut degenerate = Vec::with_capacity(width);
    for c in 0..width {
        let p: Vec<f64> = predictions.iter().map(|row| row[c]).collect();
        let t: Vec<f64> = targets.iter().map(|row| row[c]).collect();
        let (v, d) = pearson_or_zero(&p, &t)?;
        r.push(v);
        degenerate.push(d);
    }
    Ok(Scores { r, degenerate })
}
