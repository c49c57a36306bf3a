//! Training losses: frequency-weighted anti-wrapping phase losses,
//! log-amplitude, complex-spectrum and mel losses, and their weighted sum.

use std::sync::Arc;

use crate::autodiff::{Graph, Tensor, Var};
use crate::dsp::{mel_filterbank, Domain, Fourier, SpectralConfig, Spectrogram};
use crate::error::{bail, Result};
use crate::model::text_enum;
use crate::real::Real;

/// Per-bin weights `w[n] = ρ^(n/(N−1))`; the per-frame weights are all ones.
#[derive(Clone, Debug, PartialEq)]
pub struct FwawWeights {
    rho: f64,
    w: Vec<f64>,
}

impl FwawWeights {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }
}

/// Geometric frequency weights from 1 at DC up to `rho` at Nyquist.
pub fn fwaw_weights(n: usize, rho: f64) -> Result<FwawWeights> {
    if !(rho > 0.0) || !rho.is_finite() {
        bail!(Domain, "rho must be positive and finite, got {rho}");
    }
    if n < 2 {
        bail!(InvalidInput, "frequency weights need at least 2 bins, got {n}");
    }
    let step = rho.ln() / (n - 1) as f64;
    let mut w: Vec<f64> = (0..n).map(|i| (step * i as f64).exp()).collect();
    // Pin the endpoints against rounding in exp/ln.
    w[0] = 1.0;
    w[n - 1] = rho;
    Ok(FwawWeights { rho, w })
}

/// Phase loss weighting across bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseLossKind {
    Fwaw,
    Unweighted,
}

text_enum!(PhaseLossKind { Fwaw => "fwaw", Unweighted => "unweighted" });

/// Multipliers of the non-phase terms in the total loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub amplitude: f64,
    pub stft: f64,
    pub mel: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { amplitude: 0.45, stft: 0.2, mel: 0.45 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("amplitude", self.amplitude), ("stft", self.stft), ("mel", self.mel)] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!(Config, "loss weight for {name} must be a non-negative number, got {v}");
            }
        }
        Ok(())
    }
}

/// Unweighted loss terms of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub ip: f64,
    pub gd: f64,
    pub iaf: f64,
    pub amplitude: f64,
    pub stft: f64,
    pub mel: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub ip: f64,
    pub gd: f64,
    pub iaf: f64,
    pub amplitude: f64,
    pub stft: f64,
    pub mel: f64,
    pub total: f64,
}

/// `ip + gd + iaf + λ_A·amplitude + λ_S·stft + λ_Mel·mel`.
pub fn total_loss(parts: &LossParts, lambda: &LossWeights) -> Result<LossReport> {
    let p = parts;
    for (name, v) in [("ip", p.ip), ("gd", p.gd), ("iaf", p.iaf), ("amplitude", p.amplitude), ("stft", p.stft), ("mel", p.mel)] {
        if !v.is_finite() {
            bail!(Numerical, "{name} loss is not finite ({v})");
        }
    }
    let total = p.ip + p.gd + p.iaf + lambda.amplitude * p.amplitude + lambda.stft * p.stft + lambda.mel * p.mel;
    Ok(LossReport { ip: p.ip, gd: p.gd, iaf: p.iaf, amplitude: p.amplitude, stft: p.stft, mel: p.mel, total })
}

fn same_shape<T: Real>(g: &Graph<T>, a: Var, b: Var, what: &str) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        bail!(Shape, "{what}: shapes {:?} and {:?} differ", g.shape(a), g.shape(b));
    }
    Ok(())
}

/// Weighted anti-wrapped IP, GD and IAF terms for phases `[B, F, N]`,
/// each averaged over all entries (so over the batch as well).
pub fn fwaw_phase_terms<T: Real>(g: &mut Graph<T>, p_hat: Var, p: Var, w: &[f64]) -> Result<(Var, Var, Var)> {
    same_shape(g, p_hat, p, "phase loss")?;
    let shape = g.shape(p).to_vec();
    if shape.len() < 2 || *shape.last().unwrap() != w.len() {
        bail!(Shape, "phase loss: {} weights for shape {shape:?}", w.len());
    }
    if shape[shape.len() - 2] < 2 {
        bail!(InvalidInput, "instantaneous frequency loss needs at least 2 frames");
    }
    let wv = g.constant_vec(&[w.len()], w.iter().map(|&x| T::lit(x)).collect())?;
    let d = g.sub(p_hat, p)?;
    let gd = g.diff_bins(d)?;
    let iaf = g.diff_frames(d)?;
    let term = |g: &mut Graph<T>, x: Var| -> Result<Var> {
        let a = g.anti_wrap(x);
        let aw = g.mul(a, wv)?;
        Ok(g.mean(aw))
    };
    Ok((term(g, d)?, term(g, gd)?, term(g, iaf)?))
}

/// Mean squared error of log amplitudes.
pub fn amplitude_term<T: Real>(g: &mut Graph<T>, log_hat: Var, log_a: Var) -> Result<Var> {
    same_shape(g, log_hat, log_a, "amplitude loss")?;
    let d = g.sub(log_hat, log_a)?;
    let sq = g.square(d);
    Ok(g.mean(sq))
}

/// Mean `|Ŝ − S|²` over complex entries given real/imaginary parts.
pub fn complex_mse<T: Real>(g: &mut Graph<T>, re_hat: Var, im_hat: Var, re: Var, im: Var) -> Result<Var> {
    same_shape(g, re_hat, re, "spectral loss")?;
    same_shape(g, im_hat, im, "spectral loss")?;
    let dr = g.sub(re_hat, re)?;
    let di = g.sub(im_hat, im)?;
    let (sr, si) = (g.square(dr), g.square(di));
    let s = g.add(sr, si)?;
    Ok(g.mean(s))
}

/// Complex spectrum re-analysed after overlap-add, `[B, F, N]` parts.
pub struct Reanalysis {
    pub re: Var,
    pub im: Var,
}

/// Loss evaluation bound to one spectral configuration.
pub struct Objective<T: Real> {
    spectral: SpectralConfig,
    fourier: Arc<Fourier<T>>,
    mel_fb: Tensor<T>,
    phase_w: Vec<f64>,
    pub lambda: LossWeights,
    /// Include the overlap-add consistency term in the spectral loss.
    pub consistency: bool,
}

/// Natural targets for one batch, each `[B, F, ·]`.
#[derive(Clone, Copy, Debug)]
pub struct Targets {
    pub log_amp: Var,
    pub phase: Var,
    pub re: Var,
    pub im: Var,
    /// Log of the floored linear mel.
    pub log_mel: Var,
}

/// Predictions entering the losses, each `[B, F, N]`.
#[derive(Clone, Copy, Debug)]
pub struct Predictions {
    pub log_amp: Var,
    pub phase: Var,
    pub re: Var,
    pub im: Var,
}

/// Graph nodes of every loss term and the total.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub ip: Var,
    pub gd: Var,
    pub iaf: Var,
    pub amplitude: Var,
    pub stft: Var,
    pub mel: Var,
    pub total: Var,
}

impl LossVars {
    pub fn report<T: Real>(&self, g: &Graph<T>, lambda: &LossWeights) -> Result<LossReport> {
        let v = |x: Var| g.scalar(x).as_f64();
        let parts = LossParts {
            ip: v(self.ip),
            gd: v(self.gd),
            iaf: v(self.iaf),
            amplitude: v(self.amplitude),
            stft: v(self.stft),
            mel: v(self.mel),
        };
        total_loss(&parts, lambda)
    }
}

impl<T: Real> Objective<T> {
    pub fn new(spectral: &SpectralConfig, rho: f64, kind: PhaseLossKind, lambda: LossWeights) -> Result<Self> {
        spectral.validate()?;
        lambda.validate()?;
        let n = spectral.n_freq();
        let w = fwaw_weights(n, rho)?;
        let phase_w = match kind {
            PhaseLossKind::Fwaw => w.w,
            PhaseLossKind::Unweighted => vec![1.0; n],
        };
        let fb = mel_filterbank(spectral)?.forward;
        let mel_fb = Tensor::new(&[fb.rows, fb.cols], fb.data.iter().map(|&v| T::lit(v)).collect())?;
        Ok(Self {
            spectral: spectral.clone(),
            fourier: Arc::new(Fourier::new(spectral)),
            mel_fb,
            phase_w,
            lambda,
            consistency: true,
        })
    }

    pub fn phase_weights(&self) -> &[f64] {
        &self.phase_w
    }

    /// Overlap-add then analyse again, over the same frames.
    pub fn reanalyze(&self, g: &mut Graph<T>, re: Var, im: Var) -> Result<Reanalysis> {
        let frames = g.shape(re).get(1).copied().unwrap_or(0);
        let inv = Arc::new(self.fourier.window_sums(frames).1);
        let buf = g.synthesize(re, im, &self.fourier, &inv)?;
        let spec = g.analyze(buf, &self.fourier)?;
        Ok(Reanalysis { re: g.select_part(spec, 0)?, im: g.select_part(spec, 1)? })
    }

    /// `log max(mel(|S|), ε)` for a complex spectrum `[B, F, N]`.
    pub fn log_mel_of(&self, g: &mut Graph<T>, re: Var, im: Var) -> Result<Var> {
        let mag = g.magnitude(re, im)?;
        let fb = g.constant(&self.mel_fb);
        let mel = g.linear(mag, fb, None)?;
        let mel = g.clamp_min(mel, T::lit(self.spectral.amp_floor))?;
        g.log(mel)
    }

    /// Mean absolute log-mel error.
    pub fn mel_term(&self, g: &mut Graph<T>, log_mel_hat: Var, log_mel: Var) -> Result<Var> {
        same_shape(g, log_mel_hat, log_mel, "mel loss")?;
        let d = g.sub(log_mel_hat, log_mel)?;
        let a = g.abs(d);
        Ok(g.mean(a))
    }

    /// Mel loss of waveforms `[B, L]` against target log mels `[B, F, K]`.
    /// Frame counts may differ by one; only the common frames count.
    pub fn mel_term_from_wave(&self, g: &mut Graph<T>, wave: Var, log_mel: Var) -> Result<Var> {
        let padded = g.reflect_pad(wave, self.spectral.center_pad())?;
        let spec = g.analyze(padded, &self.fourier)?;
        let (re, im) = (g.select_part(spec, 0)?, g.select_part(spec, 1)?);
        let mut hat = self.log_mel_of(g, re, im)?;
        let mut target = log_mel;
        let (fh, ft) = (g.shape(hat)[1], g.shape(target).get(1).copied().unwrap_or(0));
        if fh.abs_diff(ft) > 1 {
            bail!(Shape, "waveform gives {fh} frames but the mel has {ft}");
        }
        let f = fh.min(ft);
        let k = self.spectral.mel_bins;
        let batch = g.shape(hat)[0];
        if fh != f {
            hat = take_frames(g, hat, batch, f, k)?;
        }
        if ft != f {
            target = take_frames(g, target, batch, f, k)?;
        }
        self.mel_term(g, hat, target)
    }

    /// All terms and the weighted total for one batch.
    pub fn losses(&self, g: &mut Graph<T>, pred: &Predictions, tgt: &Targets) -> Result<LossVars> {
        let (ip, gd, iaf) = fwaw_phase_terms(g, pred.phase, tgt.phase, &self.phase_w)?;
        let amplitude = amplitude_term(g, pred.log_amp, tgt.log_amp)?;
        let direct = complex_mse(g, pred.re, pred.im, tgt.re, tgt.im)?;
        let back = self.reanalyze(g, pred.re, pred.im)?;
        let stft = if self.consistency {
            let c = complex_mse(g, pred.re, pred.im, back.re, back.im)?;
            g.add(direct, c)?
        } else {
            direct
        };
        let log_mel_hat = self.log_mel_of(g, back.re, back.im)?;
        let mel = self.mel_term(g, log_mel_hat, tgt.log_mel)?;
        let l = &self.lambda;
        let mut total = g.add(ip, gd)?;
        total = g.add(total, iaf)?;
        for (v, w) in [(amplitude, l.amplitude), (stft, l.stft), (mel, l.mel)] {
            let s = g.scale(v, T::lit(w));
            total = g.add(total, s)?;
        }
        Ok(LossVars { ip, gd, iaf, amplitude, stft, mel, total })
    }
}

fn take_frames<T: Real>(g: &mut Graph<T>, x: Var, batch: usize, frames: usize, k: usize) -> Result<Var> {
    let total = g.shape(x)[1];
    let flat = g.reshape(x, &[batch, total * k])?;
    let sl = g.slice_last(flat, 0, frames * k)?;
    g.reshape(sl, &[batch, frames, k])
}

fn input<T: Real>(g: &mut Graph<T>, s: &Spectrogram) -> Result<Var> {
    g.constant_vec(&[1, s.frames(), s.bins()], s.data().iter().map(|&v| T::lit(v)).collect())
}

fn same_dims(a: &Spectrogram, b: &Spectrogram, what: &str) -> Result<()> {
    if a.frames() != b.frames() || a.bins() != b.bins() {
        bail!(Shape, "{what}: {}×{} and {}×{} differ", a.frames(), a.bins(), b.frames(), b.bins());
    }
    Ok(())
}

/// `(ip, gd, iaf)` for one utterance's phases.
pub fn fwaw_phase_loss(p_hat: &Spectrogram, p: &Spectrogram, wt: &FwawWeights) -> Result<(f64, f64, f64)> {
    p_hat.require(Domain::Phase, "predicted phase")?;
    p.require(Domain::Phase, "target phase")?;
    same_dims(p_hat, p, "phase loss")?;
    let mut g = Graph::<f64>::new();
    let (a, b) = (input(&mut g, p_hat)?, input(&mut g, p)?);
    let (ip, gd, iaf) = fwaw_phase_terms(&mut g, a, b, wt.weights())?;
    Ok((g.scalar(ip), g.scalar(gd), g.scalar(iaf)))
}

/// Log-amplitude mean squared error.
pub fn amplitude_loss(log_hat: &Spectrogram, log_a: &Spectrogram) -> Result<f64> {
    same_dims(log_hat, log_a, "amplitude loss")?;
    let mut g = Graph::<f64>::new();
    let (a, b) = (input(&mut g, log_hat)?, input(&mut g, log_a)?);
    let v = amplitude_term(&mut g, a, b)?;
    Ok(g.scalar(v))
}

/// Complex-spectrum error plus overlap-add consistency of the prediction.
pub fn stft_loss(
    log_hat: &Spectrogram,
    p_hat: &Spectrogram,
    log_a: &Spectrogram,
    p: &Spectrogram,
    cfg: &SpectralConfig,
) -> Result<f64> {
    for (s, what) in [(p_hat, "predicted phase"), (log_a, "target log amplitude"), (p, "target phase")] {
        same_dims(log_hat, s, what)?;
    }
    if log_hat.bins() != cfg.n_freq() {
        bail!(Shape, "spectra have {} bins, configuration has {}", log_hat.bins(), cfg.n_freq());
    }
    let obj = Objective::<f64>::new(cfg, 1.0, PhaseLossKind::Unweighted, LossWeights::default())?;
    let mut g = Graph::new();
    let polar = |g: &mut Graph<f64>, la: &Spectrogram, ph: &Spectrogram| -> Result<(Var, Var)> {
        let (la, ph) = (input(g, la)?, input(g, ph)?);
        let a = g.exp(la);
        let (c, s) = (g.cos(ph), g.sin(ph));
        Ok((g.mul(a, c)?, g.mul(a, s)?))
    };
    let (rh, ih) = polar(&mut g, log_hat, p_hat)?;
    let (r, i) = polar(&mut g, log_a, p)?;
    let direct = complex_mse(&mut g, rh, ih, r, i)?;
    let back = obj.reanalyze(&mut g, rh, ih)?;
    let cons = complex_mse(&mut g, rh, ih, back.re, back.im)?;
    Ok(g.scalar(direct) + g.scalar(cons))
}

/// Mean absolute error between the log mel of `wave_hat` and `log X`.
pub fn mel_loss(wave_hat: &[f64], mel: &Spectrogram, cfg: &SpectralConfig) -> Result<f64> {
    mel.require(Domain::Mel, "target mel")?;
    if mel.bins() != cfg.mel_bins {
        bail!(Shape, "mel has {} bins, configuration has {}", mel.bins(), cfg.mel_bins);
    }
    let obj = Objective::<f64>::new(cfg, 1.0, PhaseLossKind::Unweighted, LossWeights::default())?;
    let mut g = Graph::new();
    let w = g.constant_vec(&[1, wave_hat.len()], wave_hat.to_vec())?;
    let target = mel.to_log(cfg.amp_floor);
    let t = input(&mut g, &target)?;
    let v = obj.mel_term_from_wave(&mut g, w, t)?;
    Ok(g.scalar(v))
}

#[cfg(test)]
mod tests;
