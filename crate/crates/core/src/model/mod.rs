//! The serial amplitude-then-phase vocoder network.

mod complexity;
mod config;
mod network;
mod params;

pub use complexity::{conv_macs, count_flops, count_macs, frames_for_duration, macs_per_frame, param_count};
pub use config::{Activation, ModelConfig, PriorKind};
pub(crate) use config::text_enum;
pub use network::{phase_from_heads, Bound, ForwardOptions, HeadHook, Network, Outputs};
pub use params::ModelParams;

use crate::autodiff::{Graph, Var};
use crate::dsp::{principal_angle, Domain, Spectrogram};
use crate::error::{bail, Result};
use crate::real::Real;

/// Inference results for one utterance.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub log_amplitude: Spectrogram,
    pub phase: Spectrogram,
    /// `F · frame_shift` samples.
    pub wave: Vec<f64>,
}

/// Network and parameters bundled for inference.
pub struct Vocoder<T: Real> {
    network: Network<T>,
    params: ModelParams<T>,
}

impl<T: Real> Vocoder<T> {
    pub fn new(cfg: &ModelConfig, params: ModelParams<T>) -> Result<Self> {
        let expected = param_count(cfg);
        if params.count() != expected {
            bail!(Shape, "parameters hold {} values, configuration needs {expected}", params.count());
        }
        Ok(Self { network: Network::new(cfg)?, params })
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn config(&self) -> &ModelConfig {
        self.network.config()
    }

    fn input(&self, g: &mut Graph<T>, s: &Spectrogram) -> Result<Var> {
        let data = s.data().iter().map(|&v| T::lit(v)).collect();
        g.constant_vec(&[1, s.frames(), s.bins()], data)
    }

    fn to_spec(g: &Graph<T>, v: Var, domain: Domain) -> Spectrogram {
        let s = g.shape(v);
        let data = g
            .value(v)
            .iter()
            .map(|x| if domain == Domain::Phase { principal_angle(x.as_f64()) } else { x.as_f64() })
            .collect();
        Spectrogram::from_parts(domain, s[1], s[2], data)
    }

    /// Log amplitude `F × N` from a log prior `F × N`.
    pub fn predict_amplitude(&self, log_prior: &Spectrogram) -> Result<Spectrogram> {
        log_prior.require(Domain::LogAmplitude, "amplitude predictor input")?;
        let mut g = Graph::new();
        let p = Bound::new(&mut g, &self.params, false);
        let x = self.input(&mut g, log_prior)?;
        let out = self.network.predict_amplitude(&mut g, &p, x, &ForwardOptions::default())?;
        Ok(Self::to_spec(&g, out, Domain::LogAmplitude))
    }

    /// Phase `F × N` from a log amplitude (and the log prior when the
    /// configuration conditions on it).
    pub fn predict_phase(&self, log_amp: &Spectrogram, log_prior: Option<&Spectrogram>, opts: &ForwardOptions<'_, T>) -> Result<Spectrogram> {
        log_amp.require(Domain::LogAmplitude, "phase predictor input")?;
        let mut g = Graph::new();
        let p = Bound::new(&mut g, &self.params, false);
        let x = self.input(&mut g, log_amp)?;
        let prior = log_prior.map(|s| self.input(&mut g, s)).transpose()?;
        let out = self.network.predict_phase(&mut g, &p, x, prior, opts)?;
        Ok(Self::to_spec(&g, out, Domain::Phase))
    }

    /// Mel `F × K` to waveform.
    pub fn synthesize(&self, mel: &Spectrogram) -> Result<Synthesis> {
        self.synthesize_with(mel, &ForwardOptions::default())
    }

    pub fn synthesize_with(&self, mel: &Spectrogram, opts: &ForwardOptions<'_, T>) -> Result<Synthesis> {
        mel.require(Domain::Mel, "vocoder input")?;
        let mut g = Graph::new();
        let p = Bound::new(&mut g, &self.params, false);
        let x = self.input(&mut g, mel)?;
        let out = self.network.forward(&mut g, &p, x, opts)?;
        let wave = self.network.waveform(&mut g, out.re, out.im)?;
        Ok(Synthesis {
            log_amplitude: Self::to_spec(&g, out.log_amp, Domain::LogAmplitude),
            phase: Self::to_spec(&g, out.phase, Domain::Phase),
            wave: g.value(wave).iter().map(|v| v.as_f64()).collect(),
        })
    }
}
