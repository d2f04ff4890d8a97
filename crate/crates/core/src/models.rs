//! The shared convolutional trunk and the scheme-specific regression heads.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use xemo_nn::{mse, AdamState, Checkpoint, LayerSpec, Mode, NnRng, Scalar, Sequential, Tape, Tensor};

use crate::dsp::{standardize, Spectrogram};
use crate::error::{Error, Result};
use crate::explain::LinearMap;
use crate::features::{EmotionProfile, MidLevelProfile, EMOTION_NAMES, MIDLEVEL_NAMES, N_EMOTIONS, N_MIDLEVEL};

/// Convolutional trunk shared by every architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrunkConfig {
    /// Output channels of the 3x3 conv + batch norm + ReLU blocks.
    pub widths: Vec<usize>,
    /// 1-based block indices followed by a 2x2 max pool.
    pub pool_after: Vec<usize>,
    pub embedding_dim: usize,
    pub dropout: f64,
}

impl Default for TrunkConfig {
    fn default() -> Self {
        TrunkConfig { widths: vec![64, 64, 128, 128, 256], pool_after: vec![2, 4], embedding_dim: 256, dropout: 0.3 }
    }
}

impl TrunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) || self.embedding_dim == 0 {
            return Err(Error::Config("trunk widths and embedding_dim must be positive".into()));
        }
        if let Some(p) = self.pool_after.iter().find(|&&p| p == 0 || p > self.widths.len()) {
            return Err(Error::Config(format!("pool_after entry {p} outside 1..={}", self.widths.len())));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Layer stack from the single-channel input to the dropout-regularized embedding.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut channels = 1;
        for (i, &w) in self.widths.iter().enumerate() {
            specs.extend([LayerSpec::conv3x3(channels, w), LayerSpec::batch_norm(w), LayerSpec::Relu]);
            if self.pool_after.contains(&(i + 1)) {
                specs.push(LayerSpec::max_pool(2));
            }
            channels = w;
        }
        specs.extend([
            LayerSpec::conv1x1(channels, self.embedding_dim),
            LayerSpec::batch_norm(self.embedding_dim),
            LayerSpec::Relu,
            LayerSpec::AdaptiveAvgPool,
        ]);
        if self.dropout > 0.0 {
            specs.push(LayerSpec::dropout(self.dropout));
        }
        specs
    }
}

/// Network topology after the trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Embedding to 8 emotions.
    A2E,
    /// Embedding to 7 mid-level features.
    A2Mid,
    /// Embedding to 7 mid-level features, then a linear 7 to 8 emotion layer.
    Joint,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::A2E => "A2E",
            Architecture::A2Mid => "A2Mid",
            Architecture::Joint => "A2Mid2E-Joint",
        }
    }

    /// Layer stacks after the trunk; each stack's output is a model output.
    pub fn heads(self, embedding_dim: usize) -> Vec<Vec<LayerSpec>> {
        match self {
            Architecture::A2E => vec![vec![LayerSpec::dense(embedding_dim, N_EMOTIONS)]],
            Architecture::A2Mid => vec![vec![LayerSpec::dense(embedding_dim, N_MIDLEVEL)]],
            Architecture::Joint => vec![
                vec![LayerSpec::dense(embedding_dim, N_MIDLEVEL)],
                vec![LayerSpec::dense(N_MIDLEVEL, N_EMOTIONS)],
            ],
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a2e" => Ok(Architecture::A2E),
            "a2mid" => Ok(Architecture::A2Mid),
            "joint" | "a2mid2e-joint" => Ok(Architecture::Joint),
            other => Err(Error::UnsupportedScheme(format!("`{other}`; expected a2e, a2mid or joint"))),
        }
    }
}

/// Architecture descriptor stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub architecture: Architecture,
    pub trunk: TrunkConfig,
    pub stages: Vec<Vec<LayerSpec>>,
    /// Free-form provenance (config hash, seed, run).
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Outputs of one forward pass, batched as `[n, 7]` and `[n, 8]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<T> {
    pub midlevel: Option<Tensor<T>>,
    pub emotion: Option<Tensor<T>>,
}

/// Batched regression targets matching [`ModelOutput`].
#[derive(Debug, Clone, PartialEq)]
pub struct Targets<T> {
    pub midlevel: Option<Tensor<T>>,
    pub emotion: Option<Tensor<T>>,
}

/// Tapes of a train-mode forward pass.
pub struct ForwardPass<T> {
    tapes: Vec<Tape<T>>,
}

/// A trunk followed by the architecture's heads.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeModel<T = f32> {
    architecture: Architecture,
    trunk_config: TrunkConfig,
    /// Trunk first, then heads in order.
    stages: Vec<Sequential<T>>,
}

/// Builds and initializes a model. The trunk is drawn from the seeded
/// generator first, so equal seeds give identical trunks for every architecture.
pub fn build_model<T: Scalar>(architecture: Architecture, trunk: &TrunkConfig, seed: u64) -> Result<SchemeModel<T>> {
    trunk.validate()?;
    let mut rng = NnRng::seed_from_u64(seed);
    let mut stages = vec![Sequential::new(&trunk.layers(), &mut rng)?];
    for head in architecture.heads(trunk.embedding_dim) {
        stages.push(Sequential::new(&head, &mut rng)?);
    }
    let model = SchemeModel { architecture, trunk_config: trunk.clone(), stages };
    model.check_heads()?;
    Ok(model)
}

fn dense_dims(specs: &[LayerSpec]) -> Option<(usize, usize)> {
    let inputs = specs.iter().find_map(|s| match s {
        LayerSpec::Dense { inputs, .. } => Some(*inputs),
        _ => None,
    })?;
    let outputs = specs.iter().rev().find_map(|s| match s {
        LayerSpec::Dense { outputs, .. } => Some(*outputs),
        _ => None,
    })?;
    Some((inputs, outputs))
}

impl<T: Scalar> SchemeModel<T> {
    fn check_heads(&self) -> Result<()> {
        let mut width = self.trunk_config.embedding_dim;
        for (k, head) in self.stages[1..].iter().enumerate() {
            let (i, o) = dense_dims(&head.specs())
                .ok_or_else(|| Error::Config(format!("head {k} has no dense layer")))?;
            if i != width {
                return Err(Error::Config(format!("head {k} expects {i} inputs but receives {width}")));
            }
            width = o;
        }
        let expected: Vec<usize> = match self.architecture {
            Architecture::A2E => vec![N_EMOTIONS],
            Architecture::A2Mid => vec![N_MIDLEVEL],
            Architecture::Joint => vec![N_MIDLEVEL, N_EMOTIONS],
        };
        let found: Vec<usize> =
            self.stages[1..].iter().filter_map(|h| dense_dims(&h.specs()).map(|d| d.1)).collect();
        if found != expected {
            return Err(Error::Config(format!(
                "{} heads must output {expected:?}, found {found:?}",
                self.architecture
            )));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn trunk_config(&self) -> &TrunkConfig {
        &self.trunk_config
    }

    pub fn trunk(&self) -> &Sequential<T> {
        &self.stages[0]
    }

    pub fn stages(&self) -> &[Sequential<T>] {
        &self.stages
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.stages.iter().flat_map(|s| s.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.stages.iter_mut().flat_map(|s| s.params_mut()).collect()
    }

    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        self.stages.iter().flat_map(|s| s.buffers()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(|s| s.param_count()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> SchemeModel<U> {
        SchemeModel {
            architecture: self.architecture,
            trunk_config: self.trunk_config.clone(),
            stages: self.stages.iter().map(|s| s.cast()).collect(),
        }
    }

    fn assign(&self, outs: Vec<Tensor<T>>) -> ModelOutput<T> {
        let mut heads = outs.into_iter().skip(1);
        match self.architecture {
            Architecture::A2E => ModelOutput { midlevel: None, emotion: heads.next() },
            Architecture::A2Mid => ModelOutput { midlevel: heads.next(), emotion: None },
            Architecture::Joint => ModelOutput { midlevel: heads.next(), emotion: heads.next() },
        }
    }

    /// Eval-mode outputs for a `[n, 1, frames, bands]` batch.
    pub fn predict_batch(&self, input: &Tensor<T>) -> Result<ModelOutput<T>> {
        let mut outs = Vec::with_capacity(self.stages.len());
        let mut x = input.clone();
        for s in &self.stages {
            x = s.predict(&x)?;
            outs.push(x.clone());
        }
        Ok(self.assign(outs))
    }

    /// Forward pass recording tapes for [`SchemeModel::backward`].
    pub fn forward(&self, input: &Tensor<T>, mode: Mode, mut rng: Option<&mut NnRng>) -> Result<(ModelOutput<T>, ForwardPass<T>)> {
        let mut outs = Vec::with_capacity(self.stages.len());
        let mut tapes = Vec::with_capacity(self.stages.len());
        let mut x = input.clone();
        for s in &self.stages {
            let (y, tape) = s.forward(&x, mode, rng.as_deref_mut())?;
            tapes.push(tape);
            outs.push(y.clone());
            x = y;
        }
        Ok((self.assign(outs), ForwardPass { tapes }))
    }

    /// Parameter gradients in [`SchemeModel::params`] order given the loss
    /// gradients at each output. Missing gradients count as zero.
    pub fn backward(
        &self,
        pass: &ForwardPass<T>,
        grad_mid: Option<&Tensor<T>>,
        grad_emo: Option<&Tensor<T>>,
    ) -> Result<Vec<Tensor<T>>> {
        let out_grad = |head: usize| -> Option<&Tensor<T>> {
            match (self.architecture, head) {
                (Architecture::A2E, 0) => grad_emo,
                (Architecture::A2Mid, 0) | (Architecture::Joint, 0) => grad_mid,
                (Architecture::Joint, 1) => grad_emo,
                _ => None,
            }
        };
        let mut per_stage: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.stages.len());
        let mut upstream: Option<Tensor<T>> = None;
        for k in (0..self.stages.len()).rev() {
            let tape = &pass.tapes[k];
            let mut g = match k.checked_sub(1).and_then(out_grad) {
                Some(g) => g.clone(),
                None => Tensor::zeros(tape.output_shape()),
            };
            if let Some(u) = upstream.take() {
                if u.shape() != g.shape() {
                    return Err(Error::Dimension(format!("stage {k} gradient {:?} vs {:?}", u.shape(), g.shape())));
                }
                for (a, b) in g.data_mut().iter_mut().zip(u.data()) {
                    *a += *b;
                }
            }
            let (pg, dx) = self.stages[k].backward(tape, &g)?;
            per_stage.push(pg);
            upstream = Some(dx);
        }
        Ok(per_stage.into_iter().rev().flatten().collect())
    }

    pub fn update_running_stats(&mut self, pass: &ForwardPass<T>) {
        for (s, t) in self.stages.iter_mut().zip(&pass.tapes) {
            s.update_running_stats(t);
        }
    }

    /// Summed MSE over the available targets and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        input: &Tensor<T>,
        targets: &Targets<T>,
        mode: Mode,
        rng: Option<&mut NnRng>,
    ) -> Result<(f64, Vec<Tensor<T>>, ForwardPass<T>)> {
        let (out, pass) = self.forward(input, mode, rng)?;
        let mut loss = 0.0;
        let mut grad = |pred: &Option<Tensor<T>>, target: &Option<Tensor<T>>| -> Result<Option<Tensor<T>>> {
            match (pred, target) {
                (Some(p), Some(t)) => {
                    loss += mse(p, t)?.as_f64();
                    Ok(Some(xemo_nn::mse_grad(p, t)?))
                }
                _ => Ok(None),
            }
        };
        let gm = grad(&out.midlevel, &targets.midlevel)?;
        let ge = grad(&out.emotion, &targets.emotion)?;
        if gm.is_none() && ge.is_none() {
            return Err(Error::Config(format!("{} has no outputs matching the given targets", self.architecture)));
        }
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss {loss}")));
        }
        let grads = self.backward(&pass, gm.as_ref(), ge.as_ref())?;
        Ok((loss, grads, pass))
    }

    /// The joint model's final linear layer as a mid-level to emotion map.
    pub fn joint_linear(&self) -> Option<LinearMap> {
        if self.architecture != Architecture::Joint {
            return None;
        }
        let p = self.stages.last()?.params();
        let (w, b) = (p[0], p[1]);
        let weights = (0..N_MIDLEVEL)
            .map(|f| (0..N_EMOTIONS).map(|e| w.data()[e * N_MIDLEVEL + f].as_f64()).collect())
            .collect();
        LinearMap::new(&MIDLEVEL_NAMES, &EMOTION_NAMES, weights, b.data().iter().map(|v| v.as_f64()).collect()).ok()
    }

    /// Overwrites the joint model's final linear layer.
    pub fn set_joint_linear(&mut self, map: &LinearMap) -> Result<()> {
        if self.architecture != Architecture::Joint {
            return Err(Error::UnsupportedScheme(format!("{} has no linear emotion layer", self.architecture)));
        }
        if map.n_features() != N_MIDLEVEL || map.n_targets() != N_EMOTIONS {
            return Err(Error::Dimension("joint linear layer is 7x8".into()));
        }
        let mut p = self.stages.last_mut().expect("joint head").params_mut();
        for e in 0..N_EMOTIONS {
            for f in 0..N_MIDLEVEL {
                p[0].data_mut()[e * N_MIDLEVEL + f] = T::of(map.weights[f][e]);
            }
            p[1].data_mut()[e] = T::of(map.intercepts[e]);
        }
        Ok(())
    }

    pub fn descriptor(&self, metadata: serde_json::Value) -> ModelDescriptor {
        ModelDescriptor {
            architecture: self.architecture,
            trunk: self.trunk_config.clone(),
            stages: self.stages.iter().map(|s| s.specs()).collect(),
            metadata,
        }
    }
}

/// MSE of the mid-level outputs plus MSE of the emotion outputs.
pub fn joint_loss<T: Scalar>(
    mid_pred: &Tensor<T>,
    mid_target: &Tensor<T>,
    emo_pred: &Tensor<T>,
    emo_target: &Tensor<T>,
) -> Result<f64> {
    let width = |t: &Tensor<T>| t.shape().last().copied().unwrap_or(0);
    if width(mid_pred) != N_MIDLEVEL || width(emo_pred) != N_EMOTIONS {
        return Err(Error::Dimension(format!(
            "joint loss expects widths {N_MIDLEVEL} and {N_EMOTIONS}, got {} and {}",
            width(mid_pred),
            width(emo_pred)
        )));
    }
    Ok(mse(mid_pred, mid_target)?.as_f64() + mse(emo_pred, emo_target)?.as_f64())
}

/// Standardized network input of one spectrogram, shape `[1, 1, frames, bands]`.
pub fn input_tensor(spec: &Spectrogram) -> Result<Tensor<f32>> {
    Ok(Tensor::from_vec(&[1, 1, spec.frames, spec.bands], standardize(&spec.values))?)
}

/// Stacks standardized spectrograms into one batch.
pub fn batch_tensor(specs: &[&Spectrogram]) -> Result<Tensor<f32>> {
    let first = specs.first().ok_or_else(|| Error::EmptyInput("empty batch".into()))?;
    let mut data = Vec::with_capacity(specs.len() * first.values.len());
    for s in specs {
        if (s.frames, s.bands) != (first.frames, first.bands) {
            return Err(Error::Dimension(format!(
                "spectrogram `{}` is {}x{}, batch is {}x{}",
                s.source_id, s.frames, s.bands, first.frames, first.bands
            )));
        }
        data.extend(standardize(&s.values));
    }
    Ok(Tensor::from_vec(&[specs.len(), 1, first.frames, first.bands], data)?)
}

/// Single-song prediction.
pub fn predict(model: &SchemeModel<f32>, spec: &Spectrogram) -> Result<(Option<MidLevelProfile>, Option<EmotionProfile>)> {
    let out = model.predict_batch(&input_tensor(spec)?)?;
    let f64s = |t: &Tensor<f32>| t.data().iter().map(|&v| v as f64).collect::<Vec<_>>();
    Ok((
        out.midlevel.as_ref().and_then(|t| MidLevelProfile::from_slice(&f64s(t))),
        out.emotion.as_ref().and_then(|t| EmotionProfile::from_slice(&f64s(t))),
    ))
}

/// Saves weights, buffers and optionally optimizer state.
pub fn save_checkpoint(
    model: &SchemeModel<f32>,
    adam: Option<&AdamState<f32>>,
    metadata: serde_json::Value,
    path: impl AsRef<Path>,
) -> Result<()> {
    let descriptor = serde_json::to_string(&model.descriptor(metadata))?;
    Checkpoint {
        descriptor,
        params: model.params().into_iter().cloned().collect(),
        buffers: model.buffers().into_iter().cloned().collect(),
        adam: adam.cloned(),
    }
    .save(path)?;
    Ok(())
}

/// Restores a model saved by [`save_checkpoint`], with its descriptor and optimizer state.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SchemeModel<f32>, ModelDescriptor, Option<AdamState<f32>>)> {
    let ck = Checkpoint::load(path)?;
    let desc: ModelDescriptor = serde_json::from_str(&ck.descriptor)?;
    desc.trunk.validate()?;
    let mut params = ck.params.into_iter();
    let mut buffers = ck.buffers.into_iter();
    let mut stages = Vec::with_capacity(desc.stages.len());
    for specs in &desc.stages {
        let template = Sequential::<f32>::new(specs, &mut NnRng::seed_from_u64(0))?;
        let p: Vec<_> = params.by_ref().take(template.params().len()).collect();
        let b: Vec<_> = buffers.by_ref().take(template.buffers().len()).collect();
        stages.push(Sequential::from_state(specs, p, b)?);
    }
    if params.next().is_some() || buffers.next().is_some() {
        return Err(Error::Config("checkpoint holds more tensors than its descriptor".into()));
    }
    let model = SchemeModel { architecture: desc.architecture, trunk_config: desc.trunk.clone(), stages };
    model.check_heads()?;
    Ok((model, desc, ck.adam))
}
