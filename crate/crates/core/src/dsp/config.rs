use crate::error::{bail, Result};

/// Framing and filterbank parameters shared by analysis, synthesis and
/// training.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralConfig {
    pub sample_rate_hz: u32,
    /// Analysis window length in samples.
    pub frame_len: usize,
    /// Hop between consecutive frames in samples.
    pub frame_shift: usize,
    pub fft_size: usize,
    pub mel_bins: usize,
    /// Lower bound applied to amplitude-like quantities before taking logs.
    pub amp_floor: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            frame_len: 320,
            frame_shift: 80,
            fft_size: 1024,
            mel_bins: 80,
            amp_floor: 1e-5,
        }
    }
}

impl SpectralConfig {
    /// Number of non-negative frequency bins, `fft_size / 2 + 1`.
    pub fn n_freq(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Reflect padding applied on each side before framing.
    pub fn center_pad(&self) -> usize {
        self.frame_len / 2
    }

    /// Frame count produced by center-padded analysis of `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        len / self.frame_shift + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            bail!(Config, "sample_rate_hz must be positive");
        }
        if self.frame_len < 2 || self.frame_len % 2 != 0 {
            bail!(Config, "frame_len must be even and at least 2, got {}", self.frame_len);
        }
        if self.frame_shift == 0 || self.frame_len % self.frame_shift != 0 {
            bail!(
                Config,
                "frame_shift {} must divide frame_len {}",
                self.frame_shift,
                self.frame_len
            );
        }
        if self.frame_len / self.frame_shift < 2 {
            bail!(Config, "overlap-add needs frame_len >= 2 * frame_shift");
        }
        if self.fft_size < self.frame_len {
            bail!(
                Config,
                "fft_size {} is smaller than frame_len {}",
                self.fft_size,
                self.frame_len
            );
        }
        if self.fft_size % 2 != 0 {
            bail!(Config, "fft_size must be even, got {}", self.fft_size);
        }
        if self.mel_bins < 2 {
            bail!(Config, "mel_bins must be at least 2, got {}", self.mel_bins);
        }
        if self.mel_bins > self.n_freq() {
            bail!(
                Config,
                "mel_bins {} exceeds the {} frequency bins",
                self.mel_bins,
                self.n_freq()
            );
        }
        if !(self.amp_floor > 0.0 && self.amp_floor.is_finite()) {
            bail!(Config, "amp_floor must be a positive finite number");
        }
        Ok(())
    }
}
