//! Deterministic training loop, loss log and checkpoints.
//!
//! Segment sampling for step `s` uses a ChaCha8 generator seeded with the
//! run seed and switched to stream `s`, so any step's batch can be
//! regenerated without replaying earlier steps.

mod checkpoint;
mod config;
mod dataset;

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{decode_tensors, encode_tensors, Checkpoint};
pub use config::{TrainConfig, KEYS};
pub use dataset::{Batch, Dataset, Features, Utterance};

use crate::autodiff::{adamw_step, Graph, OptimState, Var};
use crate::error::{bail, Result};
use crate::model::{Bound, ForwardOptions, ModelParams, Network};
use crate::objectives::{LossReport, Objective, Predictions, Targets};

/// One tab-separated loss log line (no trailing newline).
pub fn log_line(step: u64, r: &LossReport) -> String {
    format!(
        "{step}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        r.ip, r.gd, r.iaf, r.amplitude, r.stft, r.mel, r.total
    )
}

/// File name of the checkpoint written after `step`.
pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:06}.fgv")
}

/// Steps per nominal epoch: enough segments to cover the dataset once.
pub fn epoch_steps(dataset_frames: usize, batch: usize, segment: usize) -> usize {
    dataset_frames.div_ceil(batch * segment).max(1)
}

/// Mean total loss over the `window` steps ending at `end` (1-based,
/// inclusive), clipped at the start of the run.
pub fn window_mean(totals: &[f64], end: usize, window: usize) -> f64 {
    let end = end.min(totals.len());
    let start = end.saturating_sub(window);
    let s = &totals[start..end];
    s.iter().sum::<f64>() / s.len().max(1) as f64
}

pub struct Trainer<'d> {
    cfg: TrainConfig,
    data: &'d Dataset,
    network: Network<f32>,
    objective: Objective<f32>,
    params: ModelParams<f32>,
    optim: OptimState<f32>,
    step: u64,
}

impl<'d> Trainer<'d> {
    /// Fresh run: parameters initialized from the run seed.
    pub fn new(cfg: &TrainConfig, data: &'d Dataset) -> Result<Self> {
        let params = ModelParams::init(&cfg.model, cfg.seed)?;
        let optim = OptimState::new(cfg.adam.clone(), params.tensors());
        Self::assemble(cfg, data, params, optim, 0)
    }

    /// Continues from `ckpt` under `cfg` (whose model must match).
    pub fn resume(cfg: &TrainConfig, data: &'d Dataset, ckpt: Checkpoint) -> Result<Self> {
        if ckpt.config.model != cfg.model {
            bail!(Format, "checkpoint model configuration differs from the run configuration");
        }
        let mut optim = ckpt.optim;
        optim.config = cfg.adam.clone();
        Self::assemble(cfg, data, ckpt.params, optim, ckpt.step)
    }

    fn assemble(cfg: &TrainConfig, data: &'d Dataset, params: ModelParams<f32>, optim: OptimState<f32>, step: u64) -> Result<Self> {
        cfg.validate()?;
        if data.spectral() != &cfg.model.spectral {
            bail!(Config, "dataset was analysed with a different spectral configuration");
        }
        data.check_segment(cfg.segment_frames)?;
        let mut objective = Objective::new(&cfg.model.spectral, cfg.rho, cfg.phase_loss, cfg.lambda)?;
        objective.consistency = cfg.stft_consistency;
        Ok(Self {
            cfg: cfg.clone(),
            data,
            network: Network::new(&cfg.model)?,
            objective,
            params,
            optim,
            step,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// The batch used by (1-based) step `step`.
    pub fn batch_for(&self, step: u64) -> Result<Batch> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(step);
        self.data.sample(&mut rng, self.cfg.batch_size, self.cfg.segment_frames)
    }

    /// Loss of the current parameters on `batch`, without updating.
    pub fn evaluate(&self, batch: &Batch) -> Result<LossReport> {
        let mut g = Graph::new();
        let (bound, loss) = self.build(&mut g, batch, false)?;
        let _ = bound;
        loss.report(&g, &self.cfg.lambda)
    }

    fn build(&self, g: &mut Graph<f32>, b: &Batch, trainable: bool) -> Result<(Bound, crate::objectives::LossVars)> {
        let (n, k) = (self.cfg.model.spectral.n_freq(), self.cfg.model.spectral.mel_bins);
        let (bs, s) = (b.batch, b.frames);
        let bound = Bound::new(g, &self.params, trainable);
        let c = |g: &mut Graph<f32>, width: usize, v: &[f32]| -> Result<Var> { g.constant_vec(&[bs, s, width], v.to_vec()) };
        let mel = c(g, k, &b.mel)?;
        let tgt = Targets {
            log_amp: c(g, n, &b.log_amp)?,
            phase: c(g, n, &b.phase)?,
            re: c(g, n, &b.re)?,
            im: c(g, n, &b.im)?,
            log_mel: c(g, k, &b.log_mel)?,
        };
        let out = self.network.forward(g, &bound, mel, &ForwardOptions::default())?;
        let pred = Predictions { log_amp: out.log_amp, phase: out.phase, re: out.re, im: out.im };
        let loss = self.objective.losses(g, &pred, &tgt)?;
        Ok((bound, loss))
    }

    /// One optimizer step; returns the losses before the update.
    pub fn train_step(&mut self) -> Result<LossReport> {
        let step = self.step + 1;
        let batch = self.batch_for(step)?;
        let mut g = Graph::new();
        let (bound, loss) = self.build(&mut g, &batch, true)?;
        let report = loss
            .report(&g, &self.cfg.lambda)
            .map_err(|e| crate::Error::Numerical(format!("step {step}: {e}")))?;
        let grads = g.backward(loss.total)?;
        let grads: Vec<Vec<f32>> = bound
            .vars()
            .iter()
            .zip(self.params.tensors())
            .map(|(v, t)| grads.get_or_zeros(*v, t.numel()))
            .collect();
        drop(g);
        adamw_step(self.params.tensors_mut(), &grads, &mut self.optim)
            .map_err(|e| crate::Error::Numerical(format!("step {step}: {e}")))?;
        self.step = step;
        Ok(report)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { step: self.step, config: self.cfg.clone(), params: self.params.clone(), optim: self.optim.clone() }
    }

    /// Trains until `cfg.steps`, writing one log line per step and a
    /// checkpoint every `checkpoint_every` steps and at the end (when
    /// `out_dir` is given). Returns the reports of the steps run here.
    pub fn run(&mut self, log: &mut dyn Write, out_dir: Option<&Path>) -> Result<Vec<LossReport>> {
        let mut reports = Vec::new();
        while self.step < self.cfg.steps {
            let r = self.train_step();
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    log.flush()?;
                    return Err(e);
                }
            };
            writeln!(log, "{}", log_line(self.step, &r))?;
            reports.push(r);
            let every = self.cfg.checkpoint_every;
            if let Some(dir) = out_dir {
                if (every > 0 && self.step % every == 0) || self.step == self.cfg.steps {
                    self.save_to(dir)?;
                }
            }
        }
        log.flush()?;
        Ok(reports)
    }

    /// Writes the current checkpoint into `dir`; returns its path.
    pub fn save_to(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(checkpoint_name(self.step));
        self.checkpoint().save(&path)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}
