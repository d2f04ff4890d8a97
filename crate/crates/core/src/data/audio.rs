//! PCM WAV decoding, down-mixing, resampling and peak normalization.

use std::path::Path;

use crate::error::{Error, Result};

/// Sample rate every waveform is converted to on ingestion.
pub const TARGET_RATE: u32 = 22_050;

/// Mono audio with peak amplitude at most 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl Waveform {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }
}

/// Decodes a WAV file into a mono, resampled, peak-normalized waveform.
///
/// Channels are averaged. Digital silence stays all-zero.
pub fn load_audio(path: impl AsRef<Path>, target_rate: u32) -> Result<Waveform> {
    let path = path.as_ref();
    let decode_err = |e: hound::Error| Error::Decode { path: path.to_path_buf(), message: e.to_string() };
    let mut reader = hound::WavReader::open(path).map_err(decode_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Decode { path: path.to_path_buf(), message: "zero channels".into() });
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(decode_err)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<Result<_, _>>()
                .map_err(decode_err)?
        }
    };
    if interleaved.len() < channels {
        return Err(Error::EmptyInput(format!("{} contains no samples", path.display())));
    }
    let mono: Vec<f32> = interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect();

    let source_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut samples = resample(&mono, spec.sample_rate, target_rate);
    peak_normalize(&mut samples);
    Ok(Waveform { samples, sample_rate: target_rate, source_id })
}

/// Scales to max |sample| = 1; all-zero input is left untouched.
pub fn peak_normalize(samples: &mut [f32]) {
    let peak = samples.iter().fold(0.0f32, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let inv = 1.0 / peak;
        samples.iter_mut().for_each(|s| *s *= inv);
    }
}

/// Zero crossings of the sinc kernel on each side of its center.
const ZERO_CROSSINGS: usize = 16;
const KAISER_BETA: f64 = 8.6;
/// Low-pass cutoff relative to the lower of the two Nyquist frequencies.
const ROLLOFF: f64 = 0.95;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc resampling, evaluated as a polyphase filter.
///
/// Identity rates copy the input unchanged.
pub fn resample(input: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || input.is_empty() {
        return input.to_vec();
    }
    let g = gcd(from as u64, to as u64);
    let up = (to as u64 / g) as usize;
    let down = (from as u64 / g) as usize;
    let cutoff = ROLLOFF * (to as f64 / from as f64).min(1.0);
    let half = (ZERO_CROSSINGS as f64 / cutoff).ceil() as usize;
    let taps = 2 * half;
    let i0_beta = bessel_i0(KAISER_BETA);

    // phase p covers output times with fractional input position p / up
    let mut table = vec![0.0f64; up * taps];
    for p in 0..up {
        let frac = p as f64 / up as f64;
        let row = &mut table[p * taps..(p + 1) * taps];
        for (j, w) in row.iter_mut().enumerate() {
            // input index base + j + 1 - half sits at distance tau from the output time
            let tau = frac + half as f64 - 1.0 - j as f64;
            let r = tau / half as f64;
            if r.abs() > 1.0 {
                continue;
            }
            let x = cutoff * tau;
            let sinc = if x.abs() < 1e-12 { 1.0 } else { (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x) };
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            *w = cutoff * sinc * window;
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|w| *w /= sum);
    }

    let out_len = (input.len() * up).div_ceil(down);
    let n = input.len() as isize;
    (0..out_len)
        .map(|o| {
            let pos = o * down;
            let base = (pos / up) as isize;
            let row = &table[(pos % up) * taps..][..taps];
            let first = base + 1 - half as isize;
            let mut acc = 0.0f64;
            for (j, &w) in row.iter().enumerate() {
                let k = first + j as isize;
                if k >= 0 && k < n {
                    acc += w * input[k as usize] as f64;
                }
            }
            acc as f32
        })
        .collect()
}
