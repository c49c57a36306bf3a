//! Mel-spectrogram vocoder that predicts an amplitude spectrum from a
//! pseudo-inverse prior, then a phase spectrum from that amplitude, and
//! reconstructs the waveform with an inverse STFT. Training uses only
//! amplitude, phase, spectral and mel losses.

pub mod autodiff;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod real;
pub mod trainer;

pub use error::{Error, Result};
