//! A small fixed-topology neural network engine.
//!
//! Networks are [`Sequential`] stacks of [`LayerSpec`]s. A forward pass
//! returns a [`Tape`] from which [`Sequential::backward`] computes exact
//! gradients; [`AdamState`] applies updates and [`grad_check`] verifies the
//! gradients against central finite differences. Storage is generic over
//! [`Scalar`] so the same network can be trained in `f32` and checked in `f64`.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod scalar;
pub mod sequential;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use layers::{Layer, LayerSpec, Mode};
pub use loss::{mse, mse_grad};
pub use scalar::Scalar;
pub use sequential::{Sequential, Tape};
pub use tensor::Tensor;

/// Random generator used for initialization and dropout masks (PCG-XSL-RR 128/64).
pub type NnRng = rand_pcg::Pcg64;
