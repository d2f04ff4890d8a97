use crate::dsp::SpectrogramConfig;

/// Triangular filters with log-spaced centers, applied to a power spectrum.
///
/// Each triangle peaks at 1 on its center and reaches zero at the
/// neighbouring centers. At low frequencies, where neighbouring centers are
/// closer than one FFT bin, the half-width is widened to one bin so every
/// band sees at least one bin.
#[derive(Debug, Clone)]
pub struct Filterbank {
    centers: Vec<f64>,
    /// Per band: first bin index and the weights from there on.
    bands: Vec<(usize, Vec<f64>)>,
}

impl Filterbank {
    pub fn new(cfg: &SpectrogramConfig) -> Self {
        let n = cfg.n_bands;
        let ratio = if n > 1 { (cfg.fmax / cfg.fmin).powf(1.0 / (n - 1) as f64) } else { 2.0 };
        let centers: Vec<f64> = (0..n).map(|i| cfg.fmin * ratio.powi(i as i32)).collect();
        let bin_hz = cfg.bin_hz();
        let n_bins = cfg.frame_size / 2 + 1;

        let bands = (0..n)
            .map(|i| {
                let c = centers[i];
                let lo_edge = if i > 0 { centers[i - 1] } else { c / ratio };
                let hi_edge = if i + 1 < n { centers[i + 1] } else { c * ratio };
                let lo = lo_edge.min(c - bin_hz);
                let hi = hi_edge.max(c + bin_hz);
                let first = ((lo / bin_hz).floor().max(0.0) as usize).min(n_bins - 1);
                let last = ((hi / bin_hz).ceil() as usize).min(n_bins - 1);
                let weights = (first..=last)
                    .map(|b| {
                        let f = b as f64 * bin_hz;
                        if f <= lo || f >= hi {
                            0.0
                        } else if f <= c {
                            (f - lo) / (c - lo)
                        } else {
                            (hi - f) / (hi - c)
                        }
                    })
                    .collect();
                (first, weights)
            })
            .collect();
        Filterbank { centers, bands }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Weight of FFT bin `bin` in band `band`.
    pub fn weight(&self, band: usize, bin: usize) -> f64 {
        let (first, w) = &self.bands[band];
        bin.checked_sub(*first).and_then(|k| w.get(k)).copied().unwrap_or(0.0)
    }

    /// Band energies of one power spectrum (`frame_size / 2 + 1` bins).
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for ((first, w), o) in self.bands.iter().zip(out.iter_mut()) {
            *o = w.iter().zip(&power[*first..]).map(|(a, b)| a * b).sum();
        }
    }

    /// Band whose center frequency is closest to `hz`.
    pub fn nearest_band(&self, hz: f64) -> usize {
        (0..self.len())
            .min_by(|&a, &b| (self.centers[a] - hz).abs().total_cmp(&(self.centers[b] - hz).abs()))
            .unwrap_or(0)
    }
}
