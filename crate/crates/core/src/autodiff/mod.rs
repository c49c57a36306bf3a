//! Reverse-mode differentiation over dense row-major tensors.
//!
//! A [`Graph`] is built for one forward pass and dropped afterwards.
//! Activations use a channel-last `[B, T, C]` layout.

pub mod gradcheck;
mod graph;
mod ops;
mod optim;
mod spectral;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use optim::{adamw_step, AdamConfig, OptimState};
pub use tensor::Tensor;
