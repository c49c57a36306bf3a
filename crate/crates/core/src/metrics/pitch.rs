//! Normalized-autocorrelation pitch tracking.

use crate::dsp::SpectralConfig;
use crate::error::{bail, Result};

pub const F0_MIN_HZ: f64 = 50.0;
pub const F0_MAX_HZ: f64 = 600.0;

/// Analysis window length in seconds.
const WINDOW_S: f64 = 0.040;
/// Minimum normalized correlation at the selected lag for a voiced frame.
const CLARITY_THRESHOLD: f64 = 0.3;
/// Frames whose RMS falls below this level (about -70 dBFS) are unvoiced.
const SILENCE_RMS: f64 = 3.16e-4;
/// A lag is accepted once its peak reaches this fraction of the best peak;
/// picking the earliest such peak avoids sub-harmonic octave errors.
const PEAK_RATIO: f64 = 0.9;

/// Per-frame fundamental frequency (0 for unvoiced frames).
#[derive(Clone, Debug, PartialEq)]
pub struct PitchTrack {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
    pub frame_shift: usize,
    pub sample_rate_hz: u32,
}

impl PitchTrack {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }
}

/// Frame `f` is analysed over a 40 ms window centred on sample
/// `f · frame_shift`, so frame timing matches the STFT.
pub fn extract_f0(wave: &[f64], cfg: &SpectralConfig) -> Result<PitchTrack> {
    let sr = cfg.sample_rate_hz as f64;
    let window = (WINDOW_S * sr).round() as usize;
    if wave.len() < window {
        bail!(
            InvalidInput,
            "pitch extraction needs at least {window} samples, got {}",
            wave.len()
        );
    }
    let min_lag = (sr / F0_MAX_HZ).floor().max(2.0) as usize;
    let max_lag = ((sr / F0_MIN_HZ).ceil() as usize).min(window / 2);
    let span = window - max_lag;
    let frames = cfg.frames_for(wave.len());
    let half = window / 2;

    let mut f0_hz = vec![0.0; frames];
    let mut voiced = vec![false; frames];
    let mut buf = vec![0.0; window + 1];
    let mut nccf = vec![0.0; max_lag + 2];
    for f in 0..frames {
        let start = (f * cfg.frame_shift) as isize - half as isize;
        for (i, b) in buf.iter_mut().enumerate() {
            let t = start + i as isize;
            *b = if t >= 0 && (t as usize) < wave.len() { wave[t as usize] } else { 0.0 };
        }
        let rms = (buf[..window].iter().map(|v| v * v).sum::<f64>() / window as f64).sqrt();
        if rms < SILENCE_RMS {
            continue;
        }
        let e0: f64 = buf[..span].iter().map(|v| v * v).sum();
        if e0 <= 0.0 {
            continue;
        }
        for lag in min_lag - 1..=max_lag + 1 {
            let (mut cross, mut el) = (0.0, 0.0);
            for n in 0..span {
                let y = buf.get(n + lag).copied().unwrap_or(0.0);
                cross += buf[n] * y;
                el += y * y;
            }
            nccf[lag] = if el > 0.0 { cross / (e0 * el).sqrt() } else { 0.0 };
        }
        let best = (min_lag..=max_lag).map(|l| nccf[l]).fold(f64::NEG_INFINITY, f64::max);
        if best <= CLARITY_THRESHOLD {
            continue;
        }
        let Some(lag) = (min_lag..=max_lag).find(|&l| {
            nccf[l] >= PEAK_RATIO * best && nccf[l] >= nccf[l - 1] && nccf[l] >= nccf[l + 1]
        }) else {
            continue;
        };
        let (a, b, c) = (nccf[lag - 1], nccf[lag], nccf[lag + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let hz = sr / (lag as f64 + shift);
        if b > CLARITY_THRESHOLD && (F0_MIN_HZ..=F0_MAX_HZ).contains(&hz) {
            f0_hz[f] = hz;
            voiced[f] = true;
        }
    }
    Ok(PitchTrack { f0_hz, voiced, frame_shift: cfg.frame_shift, sample_rate_hz: cfg.sample_rate_hz })
}

/// F0 error over frames voiced in both tracks and the voicing
/// disagreement rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F0Metrics {
    /// RMSE of `1200·log2(f_syn / f_ref)`; `None` when no frame is voiced
    /// in both tracks.
    pub rmse_cents: Option<f64>,
    pub vuv_error_pct: f64,
}

pub fn f0_metrics(reference: &PitchTrack, synth: &PitchTrack) -> Result<F0Metrics> {
    if reference.len() != synth.len() {
        bail!(Shape, "pitch tracks have {} and {} frames", reference.len(), synth.len());
    }
    if reference.is_empty() {
        bail!(InvalidInput, "pitch tracks are empty");
    }
    let mut sq = 0.0;
    let mut both = 0usize;
    let mut disagree = 0usize;
    for i in 0..reference.len() {
        let (rv, sv) = (reference.voiced[i], synth.voiced[i]);
        if rv != sv {
            disagree += 1;
        } else if rv {
            let cents = 1200.0 * (synth.f0_hz[i] / reference.f0_hz[i]).log2();
            sq += cents * cents;
            both += 1;
        }
    }
    Ok(F0Metrics {
        rmse_cents: (both > 0).then(|| (sq / both as f64).sqrt()),
        vuv_error_pct: 100.0 * disagree as f64 / reference.len() as f64,
    })
}
