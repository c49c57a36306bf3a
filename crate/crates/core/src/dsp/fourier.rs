//! Framed real DFT kernels with exact adjoints.
//!
//! Frames start every `frame_shift` samples of an already padded signal.
//! Each windowed frame is rotated so that its centre sits at DFT index 0,
//! making phase relative to the frame centre.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::SpectralConfig;
use crate::real::Real;

/// Periodic Hann window of length `len`.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
        .collect()
}

/// Planned transforms and window for one [`SpectralConfig`].
pub struct Fourier<T: Real> {
    fft_size: usize,
    frame_len: usize,
    hop: usize,
    n_freq: usize,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Fourier<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier")
            .field("fft_size", &self.fft_size)
            .field("frame_len", &self.frame_len)
            .field("hop", &self.hop)
            .finish()
    }
}

impl<T: Real> Fourier<T> {
    pub fn new(cfg: &SpectralConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft_size: cfg.fft_size,
            frame_len: cfg.frame_len,
            hop: cfg.frame_shift,
            n_freq: cfg.n_freq(),
            window: hann_window(cfg.frame_len).into_iter().map(T::lit).collect(),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        }
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Length of the overlap-add buffer spanned by `frames` frames.
    pub fn span(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.frame_len
        }
    }

    /// Frames that fit in a padded signal of `len` samples.
    pub fn frames_in(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    #[inline]
    fn slot(&self, j: usize) -> usize {
        (j + self.fft_size - self.frame_len / 2) % self.fft_size
    }

    /// Windowed DFT of every frame; outputs are `frames × n_freq`.
    pub fn analyze(&self, signal: &[T], frames: usize, re: &mut [T], im: &mut [T]) {
        let n = self.n_freq;
        debug_assert!(self.span(frames) <= signal.len());
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft_size];
        for f in 0..frames {
            buf.fill(Complex::new(T::zero(), T::zero()));
            let frame = &signal[f * self.hop..f * self.hop + self.frame_len];
            for (j, (&x, &w)) in frame.iter().zip(&self.window).enumerate() {
                buf[self.slot(j)].re = x * w;
            }
            self.forward.process(&mut buf);
            for k in 0..n {
                re[f * n + k] = buf[k].re;
                im[f * n + k] = buf[k].im;
            }
        }
    }

    /// Adjoint of [`Fourier::analyze`]: accumulates into `grad_signal`.
    pub fn analyze_adjoint(&self, g_re: &[T], g_im: &[T], frames: usize, grad_signal: &mut [T]) {
        let n = self.n_freq;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft_size];
        for f in 0..frames {
            buf.fill(Complex::new(T::zero(), T::zero()));
            for k in 0..n {
                buf[k] = Complex::new(g_re[f * n + k], g_im[f * n + k]);
            }
            self.inverse.process(&mut buf);
            let out = &mut grad_signal[f * self.hop..f * self.hop + self.frame_len];
            for (j, (g, &w)) in out.iter_mut().zip(&self.window).enumerate() {
                *g = *g + w * buf[self.slot(j)].re;
            }
        }
    }

    /// Squared-window overlap sum and its guarded reciprocal over the
    /// buffer spanned by `frames` frames. The reciprocal is zero wherever
    /// the window sum vanishes.
    pub fn window_sums(&self, frames: usize) -> (Vec<T>, Vec<T>) {
        let mut sum = vec![T::zero(); self.span(frames)];
        for f in 0..frames {
            for (j, &w) in self.window.iter().enumerate() {
                sum[f * self.hop + j] = sum[f * self.hop + j] + w * w;
            }
        }
        let tiny = T::lit(1e-10);
        let inv = sum
            .iter()
            .map(|&s| if s > tiny { T::one() / s } else { T::zero() })
            .collect();
        (sum, inv)
    }

    /// Inverse DFT of each half spectrum, windowed overlap-add, normalized
    /// by the squared-window sum. Returns a buffer of [`Fourier::span`]
    /// samples in padded coordinates.
    pub fn synthesize(&self, re: &[T], im: &[T], frames: usize, inv_wsum: &[T]) -> Vec<T> {
        let n = self.n_freq;
        let m = self.fft_size;
        let scale = T::one() / T::lit(m as f64);
        let mut out = vec![T::zero(); self.span(frames)];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
        for f in 0..frames {
            for k in 0..n {
                buf[k] = Complex::new(re[f * n + k], im[f * n + k]);
            }
            buf[0].im = T::zero();
            buf[m / 2].im = T::zero();
            for k in 1..m / 2 {
                buf[m - k] = buf[k].conj();
            }
            self.inverse.process(&mut buf);
            let dst = &mut out[f * self.hop..f * self.hop + self.frame_len];
            for (j, (y, &w)) in dst.iter_mut().zip(&self.window).enumerate() {
                *y = *y + w * buf[self.slot(j)].re * scale;
            }
        }
        for (y, &s) in out.iter_mut().zip(inv_wsum) {
            *y = *y * s;
        }
        out
    }

    /// Adjoint of [`Fourier::synthesize`]: accumulates into `g_re`/`g_im`.
    pub fn synthesize_adjoint(
        &self,
        grad_out: &[T],
        frames: usize,
        inv_wsum: &[T],
        g_re: &mut [T],
        g_im: &mut [T],
    ) {
        let n = self.n_freq;
        let m = self.fft_size;
        let scale = T::one() / T::lit(m as f64);
        let two = T::lit(2.0);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
        for f in 0..frames {
            buf.fill(Complex::new(T::zero(), T::zero()));
            for (j, &w) in self.window.iter().enumerate() {
                let t = f * self.hop + j;
                buf[self.slot(j)].re = grad_out[t] * inv_wsum[t] * w;
            }
            self.forward.process(&mut buf);
            for k in 0..n {
                let c = if k == 0 || k == m / 2 { scale } else { two * scale };
                g_re[f * n + k] = g_re[f * n + k] + c * buf[k].re;
                g_im[f * n + k] = g_im[f * n + k] + c * buf[k].im;
            }
        }
    }
}

/// Reflect padding that excludes the edge sample on both sides.
pub fn reflect_pad<T: Copy>(x: &[T], pad: usize) -> Vec<T> {
    let len = x.len();
    debug_assert!(len > pad);
    let mut out = Vec::with_capacity(len + 2 * pad);
    out.extend((0..pad).map(|i| x[pad - i]));
    out.extend_from_slice(x);
    out.extend((0..pad).map(|j| x[len - 2 - j]));
    out
}

/// Index into the unpadded signal for each padded position.
pub fn reflect_source_index(len: usize, pad: usize, padded_idx: usize) -> usize {
    if padded_idx < pad {
        pad - padded_idx
    } else if padded_idx < pad + len {
        padded_idx - pad
    } else {
        let j = padded_idx - pad - len;
        len - 2 - j
    }
}
