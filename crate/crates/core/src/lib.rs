//! Audio-to-emotion modelling through interpretable mid-level perceptual features.

pub mod artifact;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod models;
pub mod train;

pub use artifact::Provenance;
pub use error::{Error, Result};
