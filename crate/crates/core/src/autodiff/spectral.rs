//! Differentiable framed analysis and overlap-add synthesis.

use std::sync::Arc;

use super::graph::{Graph, Op, Var};
use crate::dsp::Fourier;
use crate::error::{bail, Result};
use crate::real::Real;

impl<T: Real> Graph<T> {
    /// Overlap-add synthesis of half spectra `re`, `im` of shape
    /// `[B, F, N]` into `[B, span]` samples (padded coordinates).
    /// `inv_wsum` is the guarded reciprocal window sum for `F` frames.
    pub fn synthesize(&mut self, re: Var, im: Var, fourier: &Arc<Fourier<T>>, inv_wsum: &Arc<Vec<T>>) -> Result<Var> {
        let s = self.shape(re).to_vec();
        if s.len() != 3 || self.shape(im) != s.as_slice() || s[2] != fourier.n_freq() {
            bail!(
                Shape,
                "synthesize: expected matching [B, F, {}] inputs, got {s:?} and {:?}",
                fourier.n_freq(),
                self.shape(im)
            );
        }
        let (batch, frames, n) = (s[0], s[1], s[2]);
        let span = fourier.span(frames);
        if inv_wsum.len() != span {
            bail!(Shape, "synthesize: window sum has {} samples, expected {span}", inv_wsum.len());
        }
        let mut value = Vec::with_capacity(batch * span);
        let (rv, iv) = (self.value(re), self.value(im));
        for b in 0..batch {
            let fr = b * frames * n..(b + 1) * frames * n;
            value.extend(fourier.synthesize(&rv[fr.clone()], &iv[fr], frames, inv_wsum));
        }
        let rg = self.any_grad(&[re, im]);
        let op = Op::Synthesize { re, im, fourier: Arc::clone(fourier), frames, inv_wsum: Arc::clone(inv_wsum) };
        Ok(self.push(value, vec![batch, span], op, rg))
    }

    /// Framed analysis of `[B, L]` signals into `[B, 2, F, N]` (real part
    /// then imaginary part), using every frame that fits.
    pub fn analyze(&mut self, x: Var, fourier: &Arc<Fourier<T>>) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 {
            bail!(Shape, "analyze expects [B, L], got {s:?}");
        }
        let (batch, len) = (s[0], s[1]);
        let frames = fourier.frames_in(len);
        if frames == 0 {
            bail!(InvalidInput, "signal of {len} samples is shorter than one frame");
        }
        let n = fourier.n_freq();
        let per = frames * n;
        let mut value = vec![T::zero(); batch * 2 * per];
        let xv = self.value(x);
        for b in 0..batch {
            let (re, im) = value[b * 2 * per..(b + 1) * 2 * per].split_at_mut(per);
            fourier.analyze(&xv[b * len..(b + 1) * len], frames, re, im);
        }
        let rg = self.requires_grad(x);
        let op = Op::Analyze { x, fourier: Arc::clone(fourier), frames };
        Ok(self.push(value, vec![batch, 2, frames, n], op, rg))
    }

    /// Real (`part = 0`) or imaginary (`part = 1`) half of an
    /// [`Graph::analyze`] output, shape `[B, F, N]`.
    pub fn select_part(&mut self, x: Var, part: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || s[1] != 2 || part > 1 {
            bail!(Shape, "select_part expects [B, 2, F, N] and part 0 or 1, got {s:?} and {part}");
        }
        let per = s[2] * s[3];
        let xv = self.value(x);
        let mut value = Vec::with_capacity(s[0] * per);
        for b in 0..s[0] {
            value.extend_from_slice(&xv[(b * 2 + part) * per..][..per]);
        }
        let rg = self.requires_grad(x);
        Ok(self.push(value, vec![s[0], s[2], s[3]], Op::Select { x, part }, rg))
    }
}
