use std::f64::consts::PI;

use super::spectrogram::{Domain, Matrix, Spectrogram};
use crate::error::{bail, Result};

const TWO_PI: f64 = 2.0 * PI;

/// `|x - 2π·round(x / 2π)|` with ties rounded away from zero; the result
/// lies in `[0, π]`.
pub fn anti_wrap(x: f64) -> Result<f64> {
    if !x.is_finite() {
        bail!(InvalidInput, "anti_wrap argument {x} is not finite");
    }
    Ok(anti_wrap_unchecked(x))
}

#[inline]
pub fn anti_wrap_unchecked(x: f64) -> f64 {
    (x - TWO_PI * (x / TWO_PI).round()).abs()
}

/// Axis along which [`phase_differential`] differences a phase matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Across bins within a frame (group delay).
    Frequency,
    /// Across frames within a bin (instantaneous frequency).
    Time,
}

/// Forward differences along `axis`, keeping the `F × N` shape by
/// repeating the final difference at the trailing edge.
pub fn phase_differential(p: &Spectrogram, axis: Axis) -> Result<Matrix> {
    p.require(Domain::Phase, "phase_differential input")?;
    let (frames, bins) = (p.frames(), p.bins());
    let mut out = Matrix::zeros(frames, bins);
    match axis {
        Axis::Frequency => {
            if bins < 2 {
                bail!(InvalidInput, "frequency differential needs at least 2 bins");
            }
            for f in 0..frames {
                for n in 0..bins {
                    let m = n.min(bins - 2);
                    out.set(f, n, p.get(f, m + 1) - p.get(f, m));
                }
            }
        }
        Axis::Time => {
            if frames < 2 {
                bail!(InvalidInput, "time differential needs at least 2 frames");
            }
            for f in 0..frames {
                let g = f.min(frames - 2);
                for n in 0..bins {
                    out.set(f, n, p.get(g + 1, n) - p.get(g, n));
                }
            }
        }
    }
    Ok(out)
}
