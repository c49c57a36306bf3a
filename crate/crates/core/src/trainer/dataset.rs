//! Precomputed natural targets and segment sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{mel_filterbank, mel_from_amplitude, stft_complex, SpectralConfig};
use crate::error::{bail, Result};

/// A named mono waveform.
#[derive(Clone, Debug)]
pub struct Utterance {
    pub name: String,
    pub wave: Vec<f64>,
}

/// Per-utterance features, frame-major, stored in single precision.
#[derive(Clone, Debug)]
pub struct Features {
    pub name: String,
    pub frames: usize,
    /// Linear mel floored at the amplitude floor, `F × K`.
    pub mel: Vec<f32>,
    pub log_mel: Vec<f32>,
    /// `F × N` each.
    pub log_amp: Vec<f32>,
    pub phase: Vec<f32>,
    pub re: Vec<f32>,
    pub im: Vec<f32>,
}

/// Training material with targets computed once up front.
#[derive(Clone, Debug)]
pub struct Dataset {
    spectral: SpectralConfig,
    items: Vec<Features>,
}

/// One minibatch of segments, each buffer `[B, S, ·]` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub batch: usize,
    pub frames: usize,
    pub mel: Vec<f32>,
    pub log_mel: Vec<f32>,
    pub log_amp: Vec<f32>,
    pub phase: Vec<f32>,
    pub re: Vec<f32>,
    pub im: Vec<f32>,
    /// `(utterance index, start frame)` of every segment.
    pub picks: Vec<(usize, usize)>,
}

fn f32s(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

impl Dataset {
    pub fn new(utterances: &[Utterance], spectral: &SpectralConfig) -> Result<Self> {
        if utterances.is_empty() {
            bail!(InvalidInput, "dataset is empty");
        }
        let filt = mel_filterbank(spectral)?;
        let floor = spectral.amp_floor;
        let mut items = Vec::with_capacity(utterances.len());
        for u in utterances {
            let spec = stft_complex(&u.wave, spectral)
                .map_err(|e| crate::Error::InvalidInput(format!("{}: {e}", u.name)))?;
            let amp = spec.amplitude();
            let mel = mel_from_amplitude(&amp, &filt, floor)?;
            items.push(Features {
                name: u.name.clone(),
                frames: spec.frames,
                log_mel: mel.data().iter().map(|v| v.ln() as f32).collect(),
                mel: f32s(mel.data()),
                log_amp: amp.data().iter().map(|v| v.max(floor).ln() as f32).collect(),
                phase: f32s(spec.phase().data()),
                re: f32s(&spec.re),
                im: f32s(&spec.im),
            });
        }
        Ok(Self { spectral: spectral.clone(), items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Features] {
        &self.items
    }

    pub fn spectral(&self) -> &SpectralConfig {
        &self.spectral
    }

    pub fn total_frames(&self) -> usize {
        self.items.iter().map(|f| f.frames).sum()
    }

    /// Fails unless every utterance holds at least `segment` frames.
    pub fn check_segment(&self, segment: usize) -> Result<()> {
        if let Some(short) = self.items.iter().find(|f| f.frames < segment) {
            bail!(
                InvalidInput,
                "utterance '{}' has {} frames, shorter than the {segment}-frame training segment",
                short.name,
                short.frames
            );
        }
        Ok(())
    }

    /// Draws `batch` segments of `segment` frames: utterance uniformly,
    /// then start frame uniformly.
    pub fn sample(&self, rng: &mut ChaCha8Rng, batch: usize, segment: usize) -> Result<Batch> {
        self.check_segment(segment)?;
        let (n, k) = (self.spectral.n_freq(), self.spectral.mel_bins);
        let mut out = Batch {
            batch,
            frames: segment,
            mel: Vec::with_capacity(batch * segment * k),
            log_mel: Vec::with_capacity(batch * segment * k),
            log_amp: Vec::with_capacity(batch * segment * n),
            phase: Vec::with_capacity(batch * segment * n),
            re: Vec::with_capacity(batch * segment * n),
            im: Vec::with_capacity(batch * segment * n),
            picks: Vec::with_capacity(batch),
        };
        for _ in 0..batch {
            let u = rng.random_range(0..self.items.len());
            let it = &self.items[u];
            let start = rng.random_range(0..=it.frames - segment);
            let rk = start * k..(start + segment) * k;
            let rn = start * n..(start + segment) * n;
            out.mel.extend_from_slice(&it.mel[rk.clone()]);
            out.log_mel.extend_from_slice(&it.log_mel[rk]);
            out.log_amp.extend_from_slice(&it.log_amp[rn.clone()]);
            out.phase.extend_from_slice(&it.phase[rn.clone()]);
            out.re.extend_from_slice(&it.re[rn.clone()]);
            out.im.extend_from_slice(&it.im[rn]);
            out.picks.push((u, start));
        }
        Ok(out)
    }
}
