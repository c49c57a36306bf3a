//! Deterministic spectral analysis and synthesis.

mod config;
pub mod fourier;
mod mel;
mod phase;
mod spectrogram;
mod stft;

pub use config::SpectralConfig;
pub use fourier::{hann_window, Fourier};
pub use mel::{
    amplitude_prior, hz_to_mel, mel_filterbank, mel_from_amplitude, mel_spectrogram,
    mel_spectrogram_with, mel_to_hz, pseudo_inverse, MelFilter,
};
pub use phase::{anti_wrap, anti_wrap_unchecked, phase_differential, Axis};
pub use spectrogram::{principal_angle, Domain, Matrix, Spectrogram};
pub use stft::{istft, istft_complex, stft, stft_complex, ComplexSpectrum};
