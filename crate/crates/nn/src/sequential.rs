use crate::error::{NnError, Result};
use crate::layers::{Cache, Layer, LayerSpec, Mode};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::NnRng;

/// Record of one forward call, consumed by [`Sequential::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub(crate) caches: Vec<Cache<T>>,
    pub(crate) mode: Mode,
    output_shape: Vec<usize>,
}

impl<T: Scalar> Tape<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    /// ReLU masks and max-pool selections seen during the forward pass.
    ///
    /// Two forward passes with equal signatures ran through the same linear
    /// piece of the network, which is what finite differencing needs.
    pub fn branch_signature(&self) -> Vec<u64> {
        let mut sig = Vec::new();
        for c in &self.caches {
            match c {
                Cache::Relu { mask } => {
                    for chunk in mask.chunks(64) {
                        sig.push(chunk.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i)));
                    }
                }
                Cache::MaxPool { argmax, .. } => sig.extend(argmax.iter().map(|&i| i as u64)),
                _ => {}
            }
        }
        sig
    }
}

/// A fixed feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
}

#[derive(Clone, Copy)]
enum Feature {
    Unknown,
    Spatial(usize),
    Flat(usize),
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    let mut cur = Feature::Unknown;
    for (idx, spec) in specs.iter().enumerate() {
        spec.validate(idx)?;
        let mismatch = |expected: String, found: String| {
            Err(NnError::dim(format!("layer {idx} ({})", spec.kind()), expected, found))
        };
        let describe = |f: Feature| match f {
            Feature::Unknown => "unknown".to_string(),
            Feature::Spatial(c) => format!("{c}-channel map"),
            Feature::Flat(u) => format!("{u}-vector"),
        };
        cur = match (spec.clone(), cur) {
            (LayerSpec::Conv2d { out_channels, .. }, Feature::Unknown) => Feature::Spatial(out_channels),
            (LayerSpec::Conv2d { in_channels, out_channels, .. }, Feature::Spatial(c)) if c == in_channels => {
                Feature::Spatial(out_channels)
            }
            (LayerSpec::Conv2d { in_channels, .. }, f) => {
                return mismatch(format!("{in_channels}-channel map"), describe(f))
            }
            (LayerSpec::BatchNorm { channels, .. }, Feature::Unknown) => Feature::Spatial(channels),
            (LayerSpec::BatchNorm { channels, .. }, Feature::Spatial(c)) if c == channels => cur,
            (LayerSpec::BatchNorm { channels, .. }, Feature::Flat(c)) if c == channels => cur,
            (LayerSpec::BatchNorm { channels, .. }, f) => {
                return mismatch(format!("{channels} channels"), describe(f))
            }
            (LayerSpec::Relu | LayerSpec::Dropout { .. }, f) => f,
            (LayerSpec::MaxPool { .. }, Feature::Flat(u)) => {
                return mismatch("spatial map".into(), describe(Feature::Flat(u)))
            }
            (LayerSpec::MaxPool { .. }, f) => f,
            (LayerSpec::AdaptiveAvgPool, Feature::Spatial(c)) => Feature::Flat(c),
            (LayerSpec::AdaptiveAvgPool, Feature::Unknown) => Feature::Unknown,
            (LayerSpec::AdaptiveAvgPool, f) => return mismatch("spatial map".into(), describe(f)),
            (LayerSpec::Dense { outputs, .. }, Feature::Unknown) => Feature::Flat(outputs),
            (LayerSpec::Dense { inputs, outputs }, Feature::Flat(u)) if u == inputs => Feature::Flat(outputs),
            (LayerSpec::Dense { inputs, .. }, f) => return mismatch(format!("{inputs}-vector"), describe(f)),
        };
    }
    Ok(())
}

impl<T: Scalar> Sequential<T> {
    /// Validates the layer chain and initializes parameters from `rng`.
    pub fn new(specs: &[LayerSpec], rng: &mut NnRng) -> Result<Self> {
        check_chain(specs)?;
        Ok(Sequential {
            layers: specs.iter().map(|s| Layer::init(s.clone(), rng)).collect(),
        })
    }

    /// Rebuilds a stack from stored parameters and buffers (declaration order).
    pub fn from_state(specs: &[LayerSpec], params: Vec<Tensor<T>>, buffers: Vec<Tensor<T>>) -> Result<Self> {
        check_chain(specs)?;
        let mut template = Sequential::<T> {
            layers: specs
                .iter()
                .map(|s| Layer::init(s.clone(), &mut <NnRng as rand::SeedableRng>::seed_from_u64(0)))
                .collect(),
        };
        let mut params = params.into_iter();
        let mut buffers = buffers.into_iter();
        for (idx, layer) in template.layers.iter_mut().enumerate() {
            let take = |it: &mut dyn Iterator<Item = Tensor<T>>, like: &[Tensor<T>]| -> Result<Vec<Tensor<T>>> {
                like.iter()
                    .map(|t| {
                        let v = it
                            .next()
                            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor for layer {idx}")))?;
                        if v.shape() != t.shape() {
                            return Err(NnError::dim(
                                format!("layer {idx} ({})", layer.spec().kind()),
                                format!("{:?}", t.shape()),
                                format!("{:?}", v.shape()),
                            ));
                        }
                        Ok(v)
                    })
                    .collect()
            };
            let p = take(&mut params, &layer.params)?;
            let b = take(&mut buffers, &layer.buffers)?;
            *layer = Layer::from_parts(layer.spec().clone(), p, b);
        }
        if params.next().is_some() || buffers.next().is_some() {
            return Err(NnError::Checkpoint("more tensors than the architecture declares".into()));
        }
        Ok(template)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec().clone()).collect()
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.params.iter()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut()).collect()
    }

    pub fn buffers(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.buffers.iter()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Sequential<U> {
        Sequential { layers: self.layers.iter().map(Layer::cast).collect() }
    }

    /// Runs the stack and records a tape for [`Sequential::backward`].
    ///
    /// Train mode uses batch statistics in batch norm and samples dropout
    /// masks from `rng`; eval mode uses running statistics and no dropout.
    /// Neither mode mutates the network; call
    /// [`Sequential::update_running_stats`] to fold the batch statistics in.
    pub fn forward(&self, input: &Tensor<T>, mode: Mode, mut rng: Option<&mut NnRng>) -> Result<(Tensor<T>, Tape<T>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let (y, cache) = layer.forward(idx, &x, mode, rng.as_deref_mut())?;
            caches.push(cache);
            x = y;
        }
        let output_shape = x.shape().to_vec();
        Ok((x, Tape { caches, mode, output_shape }))
    }

    /// Eval-mode forward without recording a tape.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            x = layer.forward(idx, &x, Mode::Eval, None)?.0;
        }
        Ok(x)
    }

    /// Backpropagates `grad_out` through a recorded forward pass.
    ///
    /// Returns the parameter gradients in [`Sequential::params`] order and
    /// the gradient with respect to the input.
    pub fn backward(&self, tape: &Tape<T>, grad_out: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        if grad_out.shape() != tape.output_shape.as_slice() {
            return Err(NnError::dim(
                "backward",
                format!("{:?}", tape.output_shape),
                format!("{:?}", grad_out.shape()),
            ));
        }
        if tape.caches.len() != self.layers.len() {
            return Err(NnError::Config("tape was recorded by a different network".into()));
        }
        let mut per_layer = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (layer, cache) in self.layers.iter().zip(&tape.caches).rev() {
            let (pg, dx) = layer.backward(cache, &g)?;
            per_layer.push(pg);
            g = dx;
        }
        let grads = per_layer.into_iter().rev().flatten().collect();
        Ok((grads, g))
    }

    /// Folds train-mode batch statistics from `tape` into the running buffers.
    pub fn update_running_stats(&mut self, tape: &Tape<T>) {
        for (layer, cache) in self.layers.iter_mut().zip(&tape.caches) {
            if let (LayerSpec::BatchNorm { momentum, .. }, Cache::BatchNorm { batch_stats: Some((mean, var)), .. }) =
                (layer.spec().clone(), cache)
            {
                let mom = T::of(momentum);
                let keep = T::one() - mom;
                for (r, &m) in layer.buffers[0].data_mut().iter_mut().zip(mean) {
                    *r = keep * *r + mom * m;
                }
                for (r, &v) in layer.buffers[1].data_mut().iter_mut().zip(var) {
                    *r = keep * *r + mom * v;
                }
            }
        }
    }
}
