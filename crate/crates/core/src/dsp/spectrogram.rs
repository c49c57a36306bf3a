use std::f64::consts::PI;

use crate::error::{bail, Result};

/// What a [`Spectrogram`]'s entries represent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Amplitude,
    LogAmplitude,
    Phase,
    Mel,
}

/// Frame-major real matrix (`frames × bins`).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    data: Vec<f64>,
    frames: usize,
    bins: usize,
    domain: Domain,
}

impl Spectrogram {
    /// Builds a spectrogram, checking the domain's value constraints:
    /// amplitudes must be non-negative and phases must lie in `(-π, π]`.
    pub fn new(domain: Domain, frames: usize, bins: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * bins {
            bail!(
                Shape,
                "spectrogram data has {} entries, expected {frames}×{bins}",
                data.len()
            );
        }
        match domain {
            Domain::Amplitude => {
                if let Some(v) = data.iter().find(|v| !(**v >= 0.0)) {
                    bail!(Domain, "amplitude entry {v} is negative or NaN");
                }
            }
            Domain::Phase => {
                if let Some(v) = data.iter().find(|v| !(**v > -PI && **v <= PI)) {
                    bail!(Domain, "phase entry {v} outside (-π, π]");
                }
            }
            Domain::LogAmplitude | Domain::Mel => {}
        }
        Ok(Self { data, frames, bins, domain })
    }

    pub(crate) fn from_parts(domain: Domain, frames: usize, bins: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), frames * bins);
        Self { data, frames, bins, domain }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn get(&self, frame: usize, bin: usize) -> f64 {
        self.data[frame * self.bins + bin]
    }

    /// Copy of frames `start..start + len`.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.frames {
            bail!(Shape, "frames {start}..{} out of {}", start + len, self.frames);
        }
        let data = self.data[start * self.bins..(start + len) * self.bins].to_vec();
        Ok(Self::from_parts(self.domain, len, self.bins, data))
    }

    /// Elementwise `ln(max(x, floor))`, yielding a log-amplitude matrix.
    pub fn to_log(&self, floor: f64) -> Self {
        let data = self.data.iter().map(|v| v.max(floor).ln()).collect();
        Self::from_parts(Domain::LogAmplitude, self.frames, self.bins, data)
    }

    pub(crate) fn require(&self, domain: Domain, what: &str) -> Result<()> {
        if self.domain != domain {
            bail!(InvalidInput, "{what} must be {domain:?}, got {:?}", self.domain);
        }
        Ok(())
    }
}

/// Maps an angle to the principal interval `(-π, π]`.
pub fn principal_angle(theta: f64) -> f64 {
    if theta <= -PI {
        theta + 2.0 * PI
    } else if theta > PI {
        theta - 2.0 * PI
    } else {
        theta + 0.0
    }
}

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        crate::real::matmul_into(
            &self.data,
            false,
            &other.data,
            false,
            self.rows,
            self.cols,
            other.cols,
            &mut out.data,
            false,
        );
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
