use super::fourier::{reflect_pad, Fourier};
use super::spectrogram::{principal_angle, Domain, Spectrogram};
use super::SpectralConfig;
use crate::error::{bail, Result};

/// Real and imaginary STFT parts, each `frames × n_freq`.
#[derive(Clone, Debug)]
pub struct ComplexSpectrum {
    pub frames: usize,
    pub bins: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexSpectrum {
    pub fn amplitude(&self) -> Spectrogram {
        let data = self.re.iter().zip(&self.im).map(|(r, i)| r.hypot(*i)).collect();
        Spectrogram::from_parts(Domain::Amplitude, self.frames, self.bins, data)
    }

    pub fn phase(&self) -> Spectrogram {
        let data = self
            .re
            .iter()
            .zip(&self.im)
            .map(|(r, i)| principal_angle(i.atan2(*r)))
            .collect();
        Spectrogram::from_parts(Domain::Phase, self.frames, self.bins, data)
    }

    /// Polar construction `amp·e^{i·phase}`.
    pub fn from_polar(amplitude: &Spectrogram, phase: &Spectrogram) -> Result<Self> {
        if amplitude.frames() != phase.frames() || amplitude.bins() != phase.bins() {
            bail!(
                Shape,
                "amplitude {}×{} and phase {}×{} differ",
                amplitude.frames(),
                amplitude.bins(),
                phase.frames(),
                phase.bins()
            );
        }
        let (re, im) = amplitude
            .data()
            .iter()
            .zip(phase.data())
            .map(|(a, p)| (a * p.cos(), a * p.sin()))
            .unzip();
        Ok(Self { frames: amplitude.frames(), bins: amplitude.bins(), re, im })
    }
}

fn check_wave(wave: &[f64], cfg: &SpectralConfig) -> Result<()> {
    cfg.validate()?;
    if wave.is_empty() {
        bail!(InvalidInput, "waveform is empty");
    }
    if wave.len() <= cfg.center_pad() {
        bail!(
            InvalidInput,
            "waveform of {} samples is too short for reflect padding of {}",
            wave.len(),
            cfg.center_pad()
        );
    }
    if let Some(v) = wave.iter().find(|v| !v.is_finite()) {
        bail!(InvalidInput, "waveform contains non-finite sample {v}");
    }
    Ok(())
}

/// Center-padded complex STFT with a periodic Hann window.
pub fn stft_complex(wave: &[f64], cfg: &SpectralConfig) -> Result<ComplexSpectrum> {
    check_wave(wave, cfg)?;
    let fourier = Fourier::<f64>::new(cfg);
    let padded = reflect_pad(wave, cfg.center_pad());
    let frames = cfg.frames_for(wave.len());
    let bins = cfg.n_freq();
    let mut re = vec![0.0; frames * bins];
    let mut im = vec![0.0; frames * bins];
    fourier.analyze(&padded, frames, &mut re, &mut im);
    Ok(ComplexSpectrum { frames, bins, re, im })
}

/// Amplitude and principal-value phase spectrograms, each `F × N`.
pub fn stft(wave: &[f64], cfg: &SpectralConfig) -> Result<(Spectrogram, Spectrogram)> {
    let spec = stft_complex(wave, cfg)?;
    Ok((spec.amplitude(), spec.phase()))
}

/// Overlap-add resynthesis of a complex spectrum; returns
/// `frames · frame_shift` samples with the center padding trimmed.
pub fn istft_complex(spec: &ComplexSpectrum, cfg: &SpectralConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if spec.bins != cfg.n_freq() {
        bail!(Shape, "spectrum has {} bins, config expects {}", spec.bins, cfg.n_freq());
    }
    if spec.re.len() != spec.frames * spec.bins || spec.im.len() != spec.re.len() {
        bail!(Shape, "spectrum buffers do not match {}×{}", spec.frames, spec.bins);
    }
    let fourier = Fourier::<f64>::new(cfg);
    let (sum, inv) = fourier.window_sums(spec.frames);
    let pad = cfg.center_pad();
    let keep = spec.frames * cfg.frame_shift;
    if spec.frames == 0 {
        return Ok(Vec::new());
    }
    if let Some(t) = (pad..pad + keep).find(|&t| sum[t] <= 1e-10) {
        bail!(Config, "window overlap sum vanishes at sample {}", t as isize - pad as isize);
    }
    let full = fourier.synthesize(&spec.re, &spec.im, spec.frames, &inv);
    Ok(full[pad..pad + keep].to_vec())
}

/// Inverse STFT from amplitude and phase spectrograms.
pub fn istft(amplitude: &Spectrogram, phase: &Spectrogram, cfg: &SpectralConfig) -> Result<Vec<f64>> {
    amplitude.require(Domain::Amplitude, "istft amplitude")?;
    phase.require(Domain::Phase, "istft phase")?;
    let spec = ComplexSpectrum::from_polar(amplitude, phase)?;
    istft_complex(&spec, cfg)
}
