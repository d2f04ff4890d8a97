//! Log-frequency spectrogram extraction, cropping and on-disk caching.

pub mod cache;
mod config;
mod filterbank;
mod spectrogram;

pub use config::SpectrogramConfig;
pub(crate) use config::sha256_hex;
pub use filterbank::Filterbank;
pub use spectrogram::{
    center_frame_offset, compute_spectrogram, random_crop_offset, random_frame_offset, standardize, Spectrogram,
    SpectrogramExtractor,
};
