//! Objective quality metrics comparing a reference and a synthesized
//! waveform.

mod cepstrum;
mod pitch;
mod report;

pub use cepstrum::{cepstral_distance, mcd, mel_cepstra, MCD_ORDER};
pub use pitch::{extract_f0, f0_metrics, F0Metrics, PitchTrack, F0_MAX_HZ, F0_MIN_HZ};
pub use report::{evaluate_pair, format_report, EvalRow};

use crate::error::{bail, Result};

/// Largest length difference (one 20 ms frame at 16 kHz) tolerated by
/// pairwise metrics; longer inputs are trimmed to the shorter one.
pub const LENGTH_SLACK: usize = 320;

/// SNR reported when the residual is exactly zero.
pub const SNR_CAP_DB: f64 = 100.0;

pub(crate) fn aligned<'a>(reference: &'a [f64], synth: &'a [f64]) -> Result<(&'a [f64], &'a [f64])> {
    let n = reference.len().min(synth.len());
    let gap = reference.len().abs_diff(synth.len());
    if gap > LENGTH_SLACK {
        bail!(
            InvalidInput,
            "signal lengths {} and {} differ by more than one frame",
            reference.len(),
            synth.len()
        );
    }
    if gap > 0 {
        log::warn!("trimming signals of length {} and {} to {n}", reference.len(), synth.len());
    }
    Ok((&reference[..n], &synth[..n]))
}

/// `10·log10(‖ref‖² / ‖ref − syn‖²)`, capped at [`SNR_CAP_DB`].
pub fn snr(reference: &[f64], synth: &[f64]) -> Result<f64> {
    let (r, s) = aligned(reference, synth)?;
    let signal: f64 = r.iter().map(|v| v * v).sum();
    if signal <= 0.0 {
        bail!(InvalidInput, "reference signal has zero energy");
    }
    let noise: f64 = r.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}
