//! Layer kinds of the sequential engine and their forward/backward kernels.
//!
//! Activations are `[batch, channels, height, width]` for spatial layers and
//! `[batch, features]` after pooling. Convolutions are stride 1 with symmetric
//! zero padding and run as im2col followed by a GEMM, one sample at a time.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::Tensor;
use crate::NnRng;

/// Declarative description of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
    },
    BatchNorm {
        channels: usize,
        momentum: f64,
        eps: f64,
    },
    Relu,
    MaxPool {
        size: usize,
    },
    /// Global mean over the spatial axes, producing one value per channel.
    AdaptiveAvgPool,
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    /// 3x3 convolution with padding 1 (shape preserving).
    pub fn conv3x3(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d { in_channels, out_channels, kernel: 3, padding: 1 }
    }

    pub fn conv1x1(in_channels: usize, out_channels: usize) -> Self {
        LayerSpec::Conv2d { in_channels, out_channels, kernel: 1, padding: 0 }
    }

    pub fn batch_norm(channels: usize) -> Self {
        LayerSpec::BatchNorm { channels, momentum: 0.1, eps: 1e-5 }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense { inputs, outputs }
    }

    pub fn max_pool(size: usize) -> Self {
        LayerSpec::MaxPool { size }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::BatchNorm { .. } => "batchnorm",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::AdaptiveAvgPool => "adaptive_avg_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub(crate) fn validate(&self, idx: usize) -> Result<()> {
        let bad = |what: &str| Err(NnError::Config(format!("layer {idx} ({}): {what}", self.kind())));
        match *self {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 {
                    return bad("channels and kernel must be positive");
                }
            }
            LayerSpec::BatchNorm { channels, momentum, eps } => {
                if channels == 0 {
                    return bad("channels must be positive");
                }
                if !(momentum > 0.0 && momentum <= 1.0) || !(eps > 0.0) {
                    return bad("momentum must be in (0, 1] and eps positive");
                }
            }
            LayerSpec::MaxPool { size: 0 } => return bad("pool size must be positive"),
            LayerSpec::Dense { inputs, outputs } if inputs == 0 || outputs == 0 => {
                return bad("units must be positive")
            }
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                return bad("rate must be in [0, 1)")
            }
            _ => {}
        }
        Ok(())
    }
}

/// Forward pass behaviour: dropout and batch statistics are only active in `Train`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-layer record needed to backpropagate through one forward call.
#[derive(Debug, Clone)]
pub(crate) enum Cache<T> {
    Conv { input: Tensor<T> },
    BatchNorm {
        xhat: Vec<T>,
        inv_std: Vec<T>,
        /// Batch mean and unbiased variance, present in train mode.
        batch_stats: Option<(Vec<T>, Vec<T>)>,
    },
    Relu { mask: Vec<bool> },
    MaxPool { argmax: Vec<usize>, input_shape: Vec<usize> },
    AvgPool { input_shape: Vec<usize> },
    Dense { input: Tensor<T> },
    Dropout { scale: Option<Vec<T>> },
}

/// A layer instance with its trainable parameters and running buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    spec: LayerSpec,
    pub(crate) params: Vec<Tensor<T>>,
    pub(crate) buffers: Vec<Tensor<T>>,
}

impl<T: Scalar> Layer<T> {
    /// Kaiming-uniform (fan-in) weights, zero biases, unit BN scale.
    pub(crate) fn init(spec: LayerSpec, rng: &mut NnRng) -> Self {
        let mut kaiming = |shape: &[usize], fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect();
            Tensor::from_vec(shape, data).expect("shape matches")
        };
        let (params, buffers) = match spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => (
                vec![
                    kaiming(&[out_channels, in_channels, kernel, kernel], in_channels * kernel * kernel),
                    Tensor::zeros(&[out_channels]),
                ],
                vec![],
            ),
            LayerSpec::Dense { inputs, outputs } => (
                vec![kaiming(&[outputs, inputs], inputs), Tensor::zeros(&[outputs])],
                vec![],
            ),
            LayerSpec::BatchNorm { channels, .. } => (
                vec![Tensor::full(&[channels], T::one()), Tensor::zeros(&[channels])],
                vec![Tensor::zeros(&[channels]), Tensor::full(&[channels], T::one())],
            ),
            _ => (vec![], vec![]),
        };
        Layer { spec, params, buffers }
    }

    pub(crate) fn from_parts(spec: LayerSpec, params: Vec<Tensor<T>>, buffers: Vec<Tensor<T>>) -> Self {
        Layer { spec, params, buffers }
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn buffers(&self) -> &[Tensor<T>] {
        &self.buffers
    }

    pub(crate) fn cast<U: Scalar>(&self) -> Layer<U> {
        Layer {
            spec: self.spec.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
            buffers: self.buffers.iter().map(Tensor::cast).collect(),
        }
    }

    pub(crate) fn forward(
        &self,
        idx: usize,
        x: &Tensor<T>,
        mode: Mode,
        rng: Option<&mut NnRng>,
    ) -> Result<(Tensor<T>, Cache<T>)> {
        let name = || format!("layer {idx} ({})", self.spec.kind());
        match self.spec {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, padding } => {
                let s = x.shape();
                if s.len() != 4 || s[1] != in_channels {
                    return Err(NnError::dim(name(), format!("[N, {in_channels}, H, W]"), format!("{s:?}")));
                }
                if s[2] + 2 * padding < kernel || s[3] + 2 * padding < kernel {
                    return Err(NnError::dim(name(), format!("spatial size >= {kernel}"), format!("{s:?}")));
                }
                let geo = ConvGeom::new(s, out_channels, kernel, padding);
                let y = conv_forward(&geo, x.data(), self.params[0].data(), self.params[1].data());
                let out = Tensor::from_vec(&[s[0], out_channels, geo.ho, geo.wo], y)?;
                Ok((out, Cache::Conv { input: x.clone() }))
            }
            LayerSpec::BatchNorm { channels, eps, .. } => {
                let s = x.shape();
                if s.len() < 2 || s[1] != channels {
                    return Err(NnError::dim(name(), format!("[N, {channels}, ...]"), format!("{s:?}")));
                }
                batch_norm_forward(self, x, mode, eps)
            }
            LayerSpec::Relu => {
                let mask: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
                let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
                Ok((y, Cache::Relu { mask }))
            }
            LayerSpec::MaxPool { size } => {
                let s = x.shape();
                if s.len() != 4 || s[2] < size || s[3] < size {
                    return Err(NnError::dim(name(), format!("[N, C, >={size}, >={size}]"), format!("{s:?}")));
                }
                Ok(max_pool_forward(x, size))
            }
            LayerSpec::AdaptiveAvgPool => {
                let s = x.shape();
                if s.len() != 4 {
                    return Err(NnError::dim(name(), "[N, C, H, W]", format!("{s:?}")));
                }
                let (n, c, hw) = (s[0], s[1], s[2] * s[3]);
                let scale = T::one() / T::of(hw as f64);
                let y: Vec<T> = x
                    .data()
                    .chunks(hw)
                    .map(|plane| plane.iter().copied().sum::<T>() * scale)
                    .collect();
                Ok((Tensor::from_vec(&[n, c], y)?, Cache::AvgPool { input_shape: s.to_vec() }))
            }
            LayerSpec::Dense { inputs, outputs } => {
                let s = x.shape();
                if s.len() != 2 || s[1] != inputs {
                    return Err(NnError::dim(name(), format!("[N, {inputs}]"), format!("{s:?}")));
                }
                let n = s[0];
                let mut y = vec![T::zero(); n * outputs];
                for row in y.chunks_mut(outputs) {
                    row.copy_from_slice(self.params[1].data());
                }
                gemm(
                    MatRef::new(x.data(), n, inputs),
                    MatRef::new(self.params[0].data(), outputs, inputs).t(),
                    T::one(),
                    &mut y,
                );
                Ok((Tensor::from_vec(&[n, outputs], y)?, Cache::Dense { input: x.clone() }))
            }
            LayerSpec::Dropout { rate } => {
                if mode == Mode::Eval || rate == 0.0 {
                    return Ok((x.clone(), Cache::Dropout { scale: None }));
                }
                let rng = rng.ok_or_else(|| {
                    NnError::Config(format!("{}: train-mode dropout needs an rng", name()))
                })?;
                let keep = T::of(1.0 / (1.0 - rate));
                let scale: Vec<T> = (0..x.len())
                    .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
                    .collect();
                let y: Vec<T> = x.data().iter().zip(&scale).map(|(&v, &m)| v * m).collect();
                Ok((Tensor::from_vec(x.shape(), y)?, Cache::Dropout { scale: Some(scale) }))
            }
        }
    }

    /// Returns parameter gradients (in `params` order) and the input gradient.
    pub(crate) fn backward(&self, cache: &Cache<T>, dy: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        match (&self.spec, cache) {
            (LayerSpec::Conv2d { out_channels, kernel, padding, .. }, Cache::Conv { input }) => {
                let geo = ConvGeom::new(input.shape(), *out_channels, *kernel, *padding);
                let (dw, db, dx) = conv_backward(&geo, input.data(), self.params[0].data(), dy.data());
                Ok((
                    vec![
                        Tensor::from_vec(self.params[0].shape(), dw)?,
                        Tensor::from_vec(self.params[1].shape(), db)?,
                    ],
                    Tensor::from_vec(input.shape(), dx)?,
                ))
            }
            (LayerSpec::BatchNorm { .. }, Cache::BatchNorm { xhat, inv_std, batch_stats }) => {
                batch_norm_backward(self, dy, xhat, inv_std, batch_stats.is_some())
            }
            (LayerSpec::Relu, Cache::Relu { mask }) => {
                let dx = dy
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&g, &m)| if m { g } else { T::zero() })
                    .collect();
                Ok((vec![], Tensor::from_vec(dy.shape(), dx)?))
            }
            (LayerSpec::MaxPool { .. }, Cache::MaxPool { argmax, input_shape }) => {
                let mut dx = vec![T::zero(); input_shape.iter().product()];
                for (&src, &g) in argmax.iter().zip(dy.data()) {
                    dx[src] += g;
                }
                Ok((vec![], Tensor::from_vec(input_shape, dx)?))
            }
            (LayerSpec::AdaptiveAvgPool, Cache::AvgPool { input_shape }) => {
                let hw = input_shape[2] * input_shape[3];
                let scale = T::one() / T::of(hw as f64);
                let mut dx = Vec::with_capacity(dy.len() * hw);
                for &g in dy.data() {
                    dx.extend(std::iter::repeat_n(g * scale, hw));
                }
                Ok((vec![], Tensor::from_vec(input_shape, dx)?))
            }
            (LayerSpec::Dense { inputs, outputs }, Cache::Dense { input }) => {
                let n = input.batch();
                let mut dw = vec![T::zero(); outputs * inputs];
                gemm(
                    MatRef::new(dy.data(), n, *outputs).t(),
                    MatRef::new(input.data(), n, *inputs),
                    T::zero(),
                    &mut dw,
                );
                let mut db = vec![T::zero(); *outputs];
                for row in dy.data().chunks(*outputs) {
                    for (acc, &g) in db.iter_mut().zip(row) {
                        *acc += g;
                    }
                }
                let mut dx = vec![T::zero(); n * inputs];
                gemm(
                    MatRef::new(dy.data(), n, *outputs),
                    MatRef::new(self.params[0].data(), *outputs, *inputs),
                    T::zero(),
                    &mut dx,
                );
                Ok((
                    vec![Tensor::from_vec(&[*outputs, *inputs], dw)?, Tensor::from_vec(&[*outputs], db)?],
                    Tensor::from_vec(input.shape(), dx)?,
                ))
            }
            (LayerSpec::Dropout { .. }, Cache::Dropout { scale }) => {
                let dx = match scale {
                    None => dy.clone(),
                    Some(s) => {
                        let d = dy.data().iter().zip(s).map(|(&g, &m)| g * m).collect();
                        Tensor::from_vec(dy.shape(), d)?
                    }
                };
                Ok((vec![], dx))
            }
            (spec, _) => Err(NnError::Config(format!("tape entry does not match {} layer", spec.kind()))),
        }
    }
}

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    o: usize,
    k: usize,
    p: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn new(s: &[usize], o: usize, k: usize, p: usize) -> Self {
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        ConvGeom { n, c, h, w, o, k, p, ho: h + 2 * p + 1 - k, wo: w + 2 * p + 1 - k }
    }

    fn direct(&self) -> bool {
        self.k == 1 && self.p == 0
    }

    fn col_rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let (ho, wo, k, p) = (self.ho, self.wo, self.k, self.p);
        for ci in 0..self.c {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((ci * k + ki) * k + kj) * ho * wo..][..ho * wo];
                    // valid output columns: 0 <= ox + kj - p < w
                    let ox_lo = p.saturating_sub(kj);
                    let ox_hi = (self.w + p).saturating_sub(kj).min(wo);
                    for oy in 0..ho {
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        let iy = oy + ki;
                        if iy < p || iy - p >= self.h || ox_lo >= ox_hi {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[(iy - p) * self.w..(iy - p + 1) * self.w];
                        dst[..ox_lo].fill(T::zero());
                        dst[ox_lo..ox_hi].copy_from_slice(&src[ox_lo + kj - p..ox_hi + kj - p]);
                        dst[ox_hi..].fill(T::zero());
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let (ho, wo, k, p) = (self.ho, self.wo, self.k, self.p);
        for ci in 0..self.c {
            let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &cols[((ci * k + ki) * k + kj) * ho * wo..][..ho * wo];
                    let ox_lo = p.saturating_sub(kj);
                    let ox_hi = (self.w + p).saturating_sub(kj).min(wo);
                    if ox_lo >= ox_hi {
                        continue;
                    }
                    for oy in 0..ho {
                        let iy = oy + ki;
                        if iy < p || iy - p >= self.h {
                            continue;
                        }
                        let dst = &mut plane[(iy - p) * self.w..(iy - p + 1) * self.w];
                        let src = &row[oy * wo..(oy + 1) * wo];
                        for (d, &s) in dst[ox_lo + kj - p..ox_hi + kj - p].iter_mut().zip(&src[ox_lo..ox_hi]) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward<T: Scalar>(geo: &ConvGeom, x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let in_len = geo.c * geo.h * geo.w;
    let hw = geo.ho * geo.wo;
    let mut y = vec![T::zero(); geo.n * geo.o * hw];
    y.par_chunks_mut(geo.o * hw).enumerate().for_each(|(s, ys)| {
        for (row, &b) in ys.chunks_mut(hw).zip(bias) {
            row.fill(b);
        }
        let xs = &x[s * in_len..(s + 1) * in_len];
        let wmat = MatRef::new(weight, geo.o, geo.col_rows());
        if geo.direct() {
            gemm(wmat, MatRef::new(xs, geo.c, hw), T::one(), ys);
        } else {
            let mut cols = vec![T::zero(); geo.col_rows() * hw];
            geo.im2col(xs, &mut cols);
            gemm(wmat, MatRef::new(&cols, geo.col_rows(), hw), T::one(), ys);
        }
    });
    y
}

fn conv_backward<T: Scalar>(geo: &ConvGeom, x: &[T], weight: &[T], dy: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let in_len = geo.c * geo.h * geo.w;
    let hw = geo.ho * geo.wo;
    let rows = geo.col_rows();
    let mut dx = vec![T::zero(); geo.n * in_len];
    let per_sample: Vec<(Vec<T>, Vec<T>)> = dx
        .par_chunks_mut(in_len)
        .enumerate()
        .map(|(s, dxs)| {
            let xs = &x[s * in_len..(s + 1) * in_len];
            let dys = &dy[s * geo.o * hw..(s + 1) * geo.o * hw];
            let dymat = MatRef::new(dys, geo.o, hw);
            let db: Vec<T> = dys.chunks(hw).map(|r| r.iter().copied().sum()).collect();
            let mut dw = vec![T::zero(); geo.o * rows];
            let wmat = MatRef::new(weight, geo.o, rows);
            if geo.direct() {
                gemm(dymat, MatRef::new(xs, geo.c, hw).t(), T::zero(), &mut dw);
                gemm(wmat.t(), dymat, T::zero(), dxs);
            } else {
                let mut cols = vec![T::zero(); rows * hw];
                geo.im2col(xs, &mut cols);
                gemm(dymat, MatRef::new(&cols, rows, hw).t(), T::zero(), &mut dw);
                gemm(wmat.t(), dymat, T::zero(), &mut cols);
                geo.col2im(&cols, dxs);
            }
            (dw, db)
        })
        .collect();
    // summed in sample order so the result does not depend on scheduling
    let mut dw = vec![T::zero(); geo.o * rows];
    let mut db = vec![T::zero(); geo.o];
    for (w, b) in per_sample {
        dw.iter_mut().zip(w).for_each(|(a, v)| *a += v);
        db.iter_mut().zip(b).for_each(|(a, v)| *a += v);
    }
    (dw, db, dx)
}

fn batch_norm_forward<T: Scalar>(
    layer: &Layer<T>,
    x: &Tensor<T>,
    mode: Mode,
    eps: f64,
) -> Result<(Tensor<T>, Cache<T>)> {
    let s = x.shape();
    let (n, c) = (s[0], s[1]);
    let spatial: usize = s[2..].iter().product();
    let m = n * spatial;
    let (gamma, beta) = (layer.params[0].data(), layer.params[1].data());
    let eps = T::of(eps);

    let (mean, var, batch_stats) = match mode {
        Mode::Train => {
            if m < 2 {
                return Err(NnError::Config(
                    "batch norm in train mode needs at least two values per channel".into(),
                ));
            }
            let mut mean = vec![T::zero(); c];
            let mut var = vec![T::zero(); c];
            for ch in 0..c {
                let mut acc = 0.0f64;
                for b in 0..n {
                    acc += x.data()[(b * c + ch) * spatial..][..spatial].iter().map(|v| v.as_f64()).sum::<f64>();
                }
                let mu = acc / m as f64;
                let mut sq = 0.0f64;
                for b in 0..n {
                    sq += x.data()[(b * c + ch) * spatial..][..spatial]
                        .iter()
                        .map(|v| (v.as_f64() - mu).powi(2))
                        .sum::<f64>();
                }
                mean[ch] = T::of(mu);
                var[ch] = T::of(sq / m as f64);
            }
            let unbiased = var.iter().map(|&v| v * T::of(m as f64 / (m - 1) as f64)).collect();
            (mean.clone(), var, Some((mean, unbiased)))
        }
        Mode::Eval => (layer.buffers[0].data().to_vec(), layer.buffers[1].data().to_vec(), None),
    };

    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * spatial;
            for i in off..off + spatial {
                let h = (x.data()[i] - mean[ch]) * inv_std[ch];
                xhat[i] = h;
                y[i] = gamma[ch] * h + beta[ch];
            }
        }
    }
    Ok((Tensor::from_vec(s, y)?, Cache::BatchNorm { xhat, inv_std, batch_stats }))
}

fn batch_norm_backward<T: Scalar>(
    layer: &Layer<T>,
    dy: &Tensor<T>,
    xhat: &[T],
    inv_std: &[T],
    train: bool,
) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
    let s = dy.shape();
    let (n, c) = (s[0], s[1]);
    let spatial: usize = s[2..].iter().product();
    let m = T::of((n * spatial) as f64);
    let gamma = layer.params[0].data();
    let g = dy.data();

    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * spatial;
            for i in off..off + spatial {
                dgamma[ch] += g[i] * xhat[i];
                dbeta[ch] += g[i];
            }
        }
    }
    let mut dx = vec![T::zero(); g.len()];
    for b in 0..n {
        for ch in 0..c {
            let off = (b * c + ch) * spatial;
            let k = gamma[ch] * inv_std[ch];
            for i in off..off + spatial {
                dx[i] = if train {
                    k * (g[i] - (dbeta[ch] + xhat[i] * dgamma[ch]) / m)
                } else {
                    k * g[i]
                };
            }
        }
    }
    Ok((
        vec![Tensor::from_vec(&[c], dgamma)?, Tensor::from_vec(&[c], dbeta)?],
        Tensor::from_vec(s, dx)?,
    ))
}

fn max_pool_forward<T: Scalar>(x: &Tensor<T>, size: usize) -> (Tensor<T>, Cache<T>) {
    let s = x.shape();
    let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let (ho, wo) = (h / size, w / size);
    let mut y = Vec::with_capacity(n * c * ho * wo);
    let mut argmax = Vec::with_capacity(n * c * ho * wo);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + oy * size * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = base + (oy * size + dy) * w + ox * size + dx;
                        if x.data()[i] > x.data()[best] {
                            best = i;
                        }
                    }
                }
                y.push(x.data()[best]);
                argmax.push(best);
            }
        }
    }
    (
        Tensor::from_vec(&[n, c, ho, wo], y).expect("pool shape"),
        Cache::MaxPool { argmax, input_shape: s.to_vec() },
    )
}
