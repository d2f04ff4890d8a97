use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parameters of the log-frequency, log-magnitude spectrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramConfig {
    pub sample_rate: u32,
    pub frame_size: usize,
    /// 705 samples gives 31.28 frames per second at 22.05 kHz.
    pub hop: usize,
    pub n_bands: usize,
    /// Frames fed to the network; 313 covers a 10 s crop.
    pub n_frames: usize,
    pub crop_seconds: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor_db: f64,
    pub epsilon: f64,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            sample_rate: 22_050,
            frame_size: 2048,
            hop: 705,
            n_bands: 149,
            n_frames: 313,
            crop_seconds: 10.0,
            fmin: 30.0,
            fmax: 11_025.0,
            log_floor_db: -100.0,
            epsilon: 1e-10,
        }
    }
}

impl SpectrogramConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("spectrogram: {m}")));
        if !self.frame_size.is_power_of_two() {
            return fail(format!("frame_size {} is not a power of two", self.frame_size));
        }
        if self.hop == 0 || self.hop >= self.frame_size {
            return fail(format!("hop {} must be in [1, frame_size)", self.hop));
        }
        if self.n_bands == 0 || self.n_bands > self.frame_size / 2 + 1 {
            return fail(format!("n_bands {} exceeds {} FFT bins", self.n_bands, self.frame_size / 2 + 1));
        }
        if self.n_frames == 0 || !(self.crop_seconds > 0.0) {
            return fail("n_frames and crop_seconds must be positive".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.fmin > 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return fail(format!("need 0 < fmin < fmax <= {nyquist}"));
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive".into());
        }
        Ok(())
    }

    /// Crop length in samples.
    pub fn crop_len(&self) -> usize {
        (self.crop_seconds * self.sample_rate as f64).round() as usize
    }

    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.frame_size as f64
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
