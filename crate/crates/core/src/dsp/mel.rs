//! HTK-scale triangular filterbank, its pseudo-inverse and the amplitude
//! prior recovered from a mel-spectrogram.

use nalgebra::DMatrix;

use super::spectrogram::{Domain, Matrix, Spectrogram};
use super::stft::stft;
use super::SpectralConfig;
use crate::error::{bail, Result};

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Analysis filterbank and its Moore-Penrose pseudo-inverse.
#[derive(Clone, Debug)]
pub struct MelFilter {
    /// `n_freq × mel_bins`: `mel = amplitude · forward`.
    pub forward: Matrix,
    /// `mel_bins × n_freq`: `prior = mel · pseudo_inverse`.
    pub pseudo_inverse: Matrix,
}

impl MelFilter {
    pub fn n_freq(&self) -> usize {
        self.forward.rows
    }

    pub fn mel_bins(&self) -> usize {
        self.forward.cols
    }
}

/// Unit-peak triangular filters on the HTK mel scale from 0 Hz to Nyquist.
pub fn mel_filterbank(cfg: &SpectralConfig) -> Result<MelFilter> {
    cfg.validate()?;
    let n_freq = cfg.n_freq();
    let k = cfg.mel_bins;
    let nyquist = cfg.sample_rate_hz as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> =
        (0..k + 2).map(|i| mel_to_hz(top * i as f64 / (k + 1) as f64)).collect();
    let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_size as f64;

    let mut forward = Matrix::zeros(n_freq, k);
    for m in 0..k {
        let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        for n in 0..n_freq {
            let f = n as f64 * bin_hz;
            let w = if f > lo && f <= centre {
                (f - lo) / (centre - lo)
            } else if f > centre && f < hi {
                (hi - f) / (hi - centre)
            } else {
                0.0
            };
            forward.set(n, m, w);
        }
        if (0..n_freq).all(|n| forward.get(n, m) <= 0.0) {
            bail!(
                Config,
                "mel filter {m} ({lo:.1}-{hi:.1} Hz) covers no frequency bin; \
                 use fewer mel bins or a larger fft_size"
            );
        }
    }
    let pseudo_inverse = pseudo_inverse(&forward, 1e-8)?;
    Ok(MelFilter { forward, pseudo_inverse })
}

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// `rel_tol · σ_max` are treated as zero.
pub fn pseudo_inverse(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let dm = DMatrix::from_row_slice(a.rows, a.cols, &a.data);
    let svd = dm.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        bail!(Numerical, "singular value decomposition failed");
    };
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * sigma_max;
    // pinv = V Σ⁺ Uᵀ
    let mut out = DMatrix::<f64>::zeros(a.cols, a.rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let vi = v_t.row(i).transpose();
            let ui = u.column(i);
            out += (vi * ui.transpose()) / s;
        }
    }
    let mut data = Vec::with_capacity(a.rows * a.cols);
    for r in 0..a.cols {
        for c in 0..a.rows {
            data.push(out[(r, c)]);
        }
    }
    Ok(Matrix { rows: a.cols, cols: a.rows, data })
}

/// Projects an amplitude spectrogram through the filterbank, floored at
/// `floor`.
pub fn mel_from_amplitude(amp: &Spectrogram, filt: &MelFilter, floor: f64) -> Result<Spectrogram> {
    amp.require(Domain::Amplitude, "mel projection input")?;
    if amp.bins() != filt.n_freq() {
        bail!(Shape, "amplitude has {} bins, filterbank expects {}", amp.bins(), filt.n_freq());
    }
    let a = Matrix { rows: amp.frames(), cols: amp.bins(), data: amp.data().to_vec() };
    let mut mel = a.matmul(&filt.forward);
    for v in &mut mel.data {
        *v = v.max(floor);
    }
    Ok(Spectrogram::from_parts(Domain::Mel, amp.frames(), filt.mel_bins(), mel.data))
}

/// Mel-spectrogram `F × K` of a waveform.
pub fn mel_spectrogram(wave: &[f64], cfg: &SpectralConfig) -> Result<Spectrogram> {
    let filt = mel_filterbank(cfg)?;
    mel_spectrogram_with(wave, cfg, &filt)
}

/// As [`mel_spectrogram`] with a prebuilt filterbank.
pub fn mel_spectrogram_with(wave: &[f64], cfg: &SpectralConfig, filt: &MelFilter) -> Result<Spectrogram> {
    let (amp, _) = stft(wave, cfg)?;
    mel_from_amplitude(&amp, filt, cfg.amp_floor)
}

/// Pseudo-amplitude spectrum `max(|X · M⁺|, ε)`, `F × N`.
pub fn amplitude_prior(mel: &Spectrogram, filt: &MelFilter, floor: f64) -> Result<Spectrogram> {
    mel.require(Domain::Mel, "amplitude prior input")?;
    if mel.bins() != filt.mel_bins() {
        bail!(Shape, "mel has {} bins, filterbank expects {}", mel.bins(), filt.mel_bins());
    }
    let x = Matrix { rows: mel.frames(), cols: mel.bins(), data: mel.data().to_vec() };
    let mut prior = x.matmul(&filt.pseudo_inverse);
    for v in &mut prior.data {
        // NaN from malformed input also lands on the floor.
        let a = v.abs();
        *v = if a >= floor { a } else { floor };
    }
    Ok(Spectrogram::from_parts(Domain::Amplitude, mel.frames(), filt.n_freq(), prior.data))
}
