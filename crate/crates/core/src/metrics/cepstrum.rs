use std::f64::consts::{LN_10, PI, SQRT_2};

use super::aligned;
use crate::dsp::{mel_spectrogram, SpectralConfig};
use crate::error::{bail, Result};

/// Cepstral coefficients compared by [`mcd`] (`c1..=c13`; `c0` excluded).
pub const MCD_ORDER: usize = 13;

/// Cepstrum of one natural-log mel frame, scaled so that
/// `log_mel[m] = c0 + 2·Σ c_d·cos(πd(m + ½)/K)` over the full expansion;
/// coefficients `0..=MCD_ORDER`.
fn cepstrum(log_mel: &[f64]) -> Vec<f64> {
    let k = log_mel.len();
    (0..=MCD_ORDER.min(k - 1))
        .map(|d| {
            let dot: f64 = log_mel
                .iter()
                .enumerate()
                .map(|(m, l)| l * (PI * d as f64 * (m as f64 + 0.5) / k as f64).cos())
                .sum();
            dot / k as f64
        })
        .collect()
}

/// Per-frame mel-cepstra: DCT-II of the natural-log mel-spectrogram.
/// With this scaling the distance below is the RMS difference in dB of the
/// cepstrally smoothed log mel-spectra.
pub fn mel_cepstra(wave: &[f64], cfg: &SpectralConfig) -> Result<Vec<Vec<f64>>> {
    let mel = mel_spectrogram(wave, cfg)?;
    Ok((0..mel.frames())
        .map(|f| cepstrum(&mel.row(f).iter().map(|v| v.ln()).collect::<Vec<_>>()))
        .collect())
}

/// Mean over frames of `(10√2 / ln 10)·‖Δc‖` using coefficients `1..`.
pub fn cepstral_distance(reference: &[Vec<f64>], synth: &[Vec<f64>]) -> Result<f64> {
    if reference.len() != synth.len() || reference.is_empty() {
        bail!(
            Shape,
            "cepstra frame counts {} and {} must match and be non-zero",
            reference.len(),
            synth.len()
        );
    }
    let scale = 10.0 * SQRT_2 / LN_10;
    let total: f64 = reference
        .iter()
        .zip(synth)
        .map(|(a, b)| {
            let sq: f64 = a.iter().zip(b).skip(1).map(|(x, y)| (x - y) * (x - y)).sum();
            scale * sq.sqrt()
        })
        .sum();
    Ok(total / reference.len() as f64)
}

/// Mel-cepstral distortion in dB.
pub fn mcd(reference: &[f64], synth: &[f64], cfg: &SpectralConfig) -> Result<f64> {
    let (r, s) = aligned(reference, synth)?;
    cepstral_distance(&mel_cepstra(r, cfg)?, &mel_cepstra(s, cfg)?)
}
