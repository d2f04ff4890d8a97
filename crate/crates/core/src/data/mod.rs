//! Audio decoding, annotation tables and train/test splits.

pub mod annotations;
pub mod audio;
pub mod split;

pub use annotations::{load_annotations, AnnotationTable};
pub use audio::{load_audio, resample, Waveform, TARGET_RATE};
pub use split::{hold_out, make_splits, validation_split, Split, SplitManifest};
