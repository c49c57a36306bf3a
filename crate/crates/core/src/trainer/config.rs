//! Run configuration and its `key = value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::autodiff::AdamConfig;
use crate::error::{bail, Result};
use crate::model::ModelConfig;
use crate::objectives::{LossWeights, PhaseLossKind};

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub steps: u64,
    pub batch_size: usize,
    pub segment_frames: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub adam: AdamConfig,
    pub lambda: LossWeights,
    pub rho: f64,
    pub phase_loss: PhaseLossKind,
    pub stft_consistency: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            steps: 5000,
            batch_size: 16,
            segment_frames: 64,
            seed: 0,
            checkpoint_every: 1000,
            adam: AdamConfig::default(),
            lambda: LossWeights::default(),
            rho: 2.5,
            phase_loss: PhaseLossKind::Fwaw,
            stft_consistency: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    match v.parse() {
        Ok(x) => Ok(x),
        Err(_) => bail!(Config, "invalid value '{v}' for key '{key}'"),
    }
}

fn parse_enum<T: FromStr<Err = crate::Error>>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|e| crate::Error::Config(format!("key '{key}': {e}")))
}

macro_rules! keys {
    ($($key:literal => $($field:ident).+ : $kind:ident),+ $(,)?) => {
        /// Every accepted key, in the order written by [`TrainConfig::to_text`].
        pub const KEYS: &[&str] = &[$($key),+];

        impl TrainConfig {
            fn set(&mut self, key: &str, v: &str) -> Result<()> {
                match key {
                    $($key => self.$($field).+ = keys!(@parse $kind, key, v),)+
                    _ => bail!(Config, "unknown key '{key}'"),
                }
                Ok(())
            }

            /// Canonical text form; parsing it gives back an equal config.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(writeln!(s, "{} = {}", $key, self.$($field).+).unwrap();)+
                s
            }
        }
    };
    (@parse value, $key:ident, $v:ident) => { parse($key, $v)? };
    (@parse choice, $key:ident, $v:ident) => { parse_enum($key, $v)? };
}

keys! {
    "sample_rate_hz" => model.spectral.sample_rate_hz: value,
    "frame_len" => model.spectral.frame_len: value,
    "frame_shift" => model.spectral.frame_shift: value,
    "fft_size" => model.spectral.fft_size: value,
    "mel_bins" => model.spectral.mel_bins: value,
    "amp_floor" => model.spectral.amp_floor: value,
    "channels" => model.channels: value,
    "expansion" => model.expansion: value,
    "kernel" => model.kernel: value,
    "amp_blocks" => model.amp_blocks: value,
    "phase_blocks" => model.phase_blocks: value,
    "activation" => model.activation: choice,
    "prior" => model.prior: choice,
    "phase_sees_prior" => model.phase_sees_prior: value,
    "detach_amplitude" => model.detach_amplitude: value,
    "steps" => steps: value,
    "batch_size" => batch_size: value,
    "segment_frames" => segment_frames: value,
    "seed" => seed: value,
    "checkpoint_every" => checkpoint_every: value,
    "lr" => adam.lr: value,
    "beta1" => adam.beta1: value,
    "beta2" => adam.beta2: value,
    "eps" => adam.eps: value,
    "weight_decay" => adam.weight_decay: value,
    "lr_decay" => adam.lr_decay: value,
    "lambda_amplitude" => lambda.amplitude: value,
    "lambda_stft" => lambda.stft: value,
    "lambda_mel" => lambda.mel: value,
    "rho" => rho: value,
    "phase_loss" => phase_loss: choice,
    "stft_consistency" => stft_consistency: value,
}

impl TrainConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment;
    /// blank lines are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!(Config, "line {}: expected 'key = value', got '{line}'", no + 1);
            };
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                bail!(Config, "line {}: key '{k}' given twice", no + 1);
            }
            cfg.set(k, v).map_err(|e| crate::Error::Config(format!("line {}: {}", no + 1, strip(&e))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.adam.validate()?;
        self.lambda.validate()?;
        if self.steps == 0 {
            bail!(Config, "steps must be at least 1");
        }
        if self.batch_size == 0 {
            bail!(Config, "batch_size must be at least 1");
        }
        if self.segment_frames < 2 {
            bail!(Config, "segment_frames must be at least 2");
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            bail!(Config, "rho must be positive, got {}", self.rho);
        }
        Ok(())
    }
}

fn strip(e: &crate::Error) -> String {
    let s = e.to_string();
    s.strip_prefix("ConfigError: ").unwrap_or(&s).to_string()
}
