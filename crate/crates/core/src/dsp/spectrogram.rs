use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::data::Waveform;
use crate::dsp::{Filterbank, SpectrogramConfig};
use crate::error::{Error, Result};

/// Log-magnitude band energies, `frames x bands`, row-major by frame.
///
/// Network inputs are exactly `n_frames x n_bands`; cached whole-song
/// spectrograms may hold more frames and are cropped with [`Spectrogram::crop`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: usize,
    pub bands: usize,
    pub values: Vec<f32>,
    pub source_id: String,
    /// First sample of the analysed excerpt in the source waveform.
    pub crop_offset: usize,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.values[t * self.bands..(t + 1) * self.bands]
    }

    /// `n_frames` consecutive frames starting at `frame_offset`, padded with
    /// `floor` when the source is shorter.
    pub fn crop(&self, frame_offset: usize, n_frames: usize, hop: usize, floor: f32) -> Result<Spectrogram> {
        if frame_offset > 0 && frame_offset >= self.frames {
            return Err(Error::Range(format!(
                "frame offset {frame_offset} beyond {} frames of `{}`",
                self.frames, self.source_id
            )));
        }
        let mut values = vec![floor; n_frames * self.bands];
        let take = n_frames.min(self.frames - frame_offset);
        values[..take * self.bands]
            .copy_from_slice(&self.values[frame_offset * self.bands..(frame_offset + take) * self.bands]);
        Ok(Spectrogram {
            frames: n_frames,
            bands: self.bands,
            values,
            source_id: self.source_id.clone(),
            crop_offset: self.crop_offset + frame_offset * hop,
        })
    }

    /// Index of the loudest band in frame `t` (first on ties).
    pub fn argmax_band(&self, t: usize) -> usize {
        let f = self.frame(t);
        (0..f.len()).fold(0, |best, i| if f[i] > f[best] { i } else { best })
    }
}

/// Reusable STFT + filterbank pipeline for one configuration.
pub struct SpectrogramExtractor {
    cfg: SpectrogramConfig,
    filterbank: Filterbank,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl SpectrogramExtractor {
    pub fn new(cfg: &SpectrogramConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.frame_size;
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        Ok(SpectrogramExtractor {
            cfg: cfg.clone(),
            filterbank: Filterbank::new(cfg),
            window,
            fft: FftPlanner::new().plan_fft_forward(n),
        })
    }

    pub fn config(&self) -> &SpectrogramConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &Filterbank {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn check_rate(&self, w: &Waveform) -> Result<()> {
        if w.sample_rate != self.cfg.sample_rate {
            return Err(Error::Config(format!(
                "waveform `{}` is at {} Hz, spectrogram expects {} Hz",
                w.source_id, w.sample_rate, self.cfg.sample_rate
            )));
        }
        Ok(())
    }

    /// Center-padded STFT frames of `signal` (zero outside), mapped to dB band energies.
    fn analyse(&self, signal: &[f32], n_frames: usize) -> Vec<f32> {
        let n = self.cfg.frame_size;
        let half = n / 2;
        let n_bins = n / 2 + 1;
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0f64; n_bins];
        let mut bands = vec![0.0f64; self.cfg.n_bands];
        let mut out = Vec::with_capacity(n_frames * self.cfg.n_bands);
        for t in 0..n_frames {
            let start = (t * self.cfg.hop) as isize - half as isize;
            for (i, c) in buf.iter_mut().enumerate() {
                let k = start + i as isize;
                let s = if k >= 0 && (k as usize) < signal.len() { signal[k as usize] as f64 } else { 0.0 };
                *c = Complex::new(s * self.window[i], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf[..n_bins]) {
                *p = c.norm_sqr();
            }
            self.filterbank.apply(&power, &mut bands);
            out.extend(bands.iter().map(|&e| self.to_db(e)));
        }
        out
    }

    fn to_db(&self, energy: f64) -> f32 {
        (10.0 * (energy + self.cfg.epsilon).log10()).max(self.cfg.log_floor_db) as f32
    }

    /// Network input for the `crop_seconds` excerpt starting at `crop_offset`.
    ///
    /// Short excerpts are zero-padded at the tail; the result always has
    /// `n_frames x n_bands` cells.
    pub fn compute(&self, w: &Waveform, crop_offset: usize) -> Result<Spectrogram> {
        self.check_rate(w)?;
        if w.samples.is_empty() {
            return Err(Error::EmptyInput(format!("waveform `{}` has no samples", w.source_id)));
        }
        if crop_offset >= w.samples.len() {
            return Err(Error::Range(format!(
                "crop offset {crop_offset} beyond {} samples of `{}`",
                w.samples.len(),
                w.source_id
            )));
        }
        let end = (crop_offset + self.cfg.crop_len()).min(w.samples.len());
        let mut crop = w.samples[crop_offset..end].to_vec();
        crop.resize(self.cfg.crop_len(), 0.0);
        Ok(Spectrogram {
            frames: self.cfg.n_frames,
            bands: self.cfg.n_bands,
            values: self.analyse(&crop, self.cfg.n_frames),
            source_id: w.source_id.clone(),
            crop_offset,
        })
    }

    /// Whole-song spectrogram with one frame per hop (at least `n_frames`).
    pub fn compute_full(&self, w: &Waveform) -> Result<Spectrogram> {
        self.check_rate(w)?;
        if w.samples.is_empty() {
            return Err(Error::EmptyInput(format!("waveform `{}` has no samples", w.source_id)));
        }
        let frames = (1 + w.samples.len() / self.cfg.hop).max(self.cfg.n_frames);
        Ok(Spectrogram {
            frames,
            bands: self.cfg.n_bands,
            values: self.analyse(&w.samples, frames),
            source_id: w.source_id.clone(),
            crop_offset: 0,
        })
    }
}

/// Computes the `n_frames x n_bands` spectrogram of the excerpt at `crop_offset`.
pub fn compute_spectrogram(w: &Waveform, cfg: &SpectrogramConfig, crop_offset: usize) -> Result<Spectrogram> {
    SpectrogramExtractor::new(cfg)?.compute(w, crop_offset)
}

/// Uniform crop start in `[0, max(0, len - crop_len)]` samples.
pub fn random_crop_offset<R: Rng + ?Sized>(w: &Waveform, cfg: &SpectrogramConfig, rng: &mut R) -> usize {
    let max = w.samples.len().saturating_sub(cfg.crop_len());
    rng.random_range(0..=max)
}

/// Uniform first frame of an `n_frames` window inside `total_frames`.
pub fn random_frame_offset<R: Rng + ?Sized>(total_frames: usize, n_frames: usize, rng: &mut R) -> usize {
    rng.random_range(0..=total_frames.saturating_sub(n_frames))
}

/// First frame of the centered `n_frames` window.
pub fn center_frame_offset(total_frames: usize, n_frames: usize) -> usize {
    total_frames.saturating_sub(n_frames) / 2
}

/// Zero mean, unit variance over all cells; constant inputs only get centred.
pub fn standardize(values: &[f32]) -> Vec<f32> {
    let n = values.len().max(1) as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let inv = if var > 1e-24 { 1.0 / var.sqrt() } else { 1.0 };
    values.iter().map(|&v| ((v as f64 - mean) * inv) as f32).collect()
}
