use std::collections::HashMap;
use std::sync::Arc;

use super::config::{Activation, ModelConfig, PriorKind};
use super::params::ModelParams;
use crate::autodiff::{Graph, Tensor, Var};
use crate::dsp::{mel_filterbank, Fourier};
use crate::error::{bail, Result};
use crate::real::Real;

/// Parameters placed on a graph, looked up by name.
pub struct Bound {
    vars: HashMap<String, Var>,
    order: Vec<Var>,
}

impl Bound {
    /// Adds every tensor of `params` to `g`; trainable leaves when
    /// `trainable`, constants otherwise.
    pub fn new<T: Real>(g: &mut Graph<T>, params: &ModelParams<T>, trainable: bool) -> Self {
        let mut vars = HashMap::with_capacity(params.len());
        let mut order = Vec::with_capacity(params.len());
        for (name, t) in params.iter() {
            let v = if trainable { g.param(t) } else { g.constant(t) };
            vars.insert(name.to_string(), v);
            order.push(v);
        }
        Self { vars, order }
    }

    /// Binds already-placed vars, in parameter storage order.
    pub fn from_vars(names: &[String], vars: &[Var]) -> Self {
        let map = names.iter().cloned().zip(vars.iter().copied()).collect();
        Self { vars: map, order: vars.to_vec() }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        match self.vars.get(name) {
            Some(v) => Ok(*v),
            None => bail!(Shape, "parameter '{name}' is not bound"),
        }
    }

    /// Vars in parameter storage order.
    pub fn vars(&self) -> &[Var] {
        &self.order
    }
}

/// Replaces head outputs before the arctangent (debugging aid).
pub type HeadHook<'a, T> = &'a dyn Fn(&mut [T], &mut [T]);

/// Switches that alter a forward pass without touching parameters.
#[derive(Clone, Copy, Default)]
pub struct ForwardOptions<'a, T> {
    pub activation_override: Option<Activation>,
    pub head_hook: Option<HeadHook<'a, T>>,
}

/// Graph nodes produced by [`Network::forward`], all `[B, F, N]`.
#[derive(Clone, Copy, Debug)]
pub struct Outputs {
    pub log_prior: Var,
    pub log_amp: Var,
    pub phase: Var,
    /// Real part of `exp(log_amp)·e^{i·phase}`.
    pub re: Var,
    pub im: Var,
}

/// Structure of the vocoder plus the fixed tensors it needs.
pub struct Network<T: Real> {
    cfg: ModelConfig,
    pinv: Tensor<T>,
    fourier: Arc<Fourier<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let filt = mel_filterbank(&cfg.spectral)?;
        let inv = &filt.pseudo_inverse;
        let pinv = Tensor::new(&[inv.rows, inv.cols], inv.data.iter().map(|&v| T::lit(v)).collect())?;
        Ok(Self { cfg: cfg.clone(), pinv, fourier: Arc::new(Fourier::new(&cfg.spectral)) })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn fourier(&self) -> &Arc<Fourier<T>> {
        &self.fourier
    }

    fn floor(&self) -> T {
        T::lit(self.cfg.spectral.amp_floor)
    }

    /// Log amplitude prior `log max(|X·W|, ε)` from a linear mel `[B, F, K]`.
    pub fn log_prior(&self, g: &mut Graph<T>, p: &Bound, mel: Var) -> Result<Var> {
        let k = self.cfg.spectral.mel_bins;
        if g.shape(mel).len() != 3 || g.shape(mel)[2] != k {
            bail!(Shape, "mel input must be [B, F, {k}], got {:?}", g.shape(mel));
        }
        let w = match self.cfg.prior {
            PriorKind::PseudoInverse => g.constant(&self.pinv),
            PriorKind::LearnableLinear => p.get("prior.w")?,
        };
        let lin = g.linear(mel, w, None)?;
        let mag = g.abs(lin);
        let clamped = g.clamp_min(mag, self.floor())?;
        g.log(clamped)
    }

    fn activation(&self, opts: &ForwardOptions<'_, T>) -> Activation {
        opts.activation_override.unwrap_or(self.cfg.activation)
    }

    /// Residual block: `x + project(grn(act(expand(norm(depthwise(x))))))`.
    pub fn block(&self, g: &mut Graph<T>, p: &Bound, prefix: &str, x: Var, act: Activation) -> Result<Var> {
        let q = |s: &str| format!("{prefix}.{s}");
        let h = g.depthwise_conv(x, p.get(&q("dw.w"))?, Some(p.get(&q("dw.b"))?))?;
        let h = g.layer_norm(h, p.get(&q("norm.g"))?, p.get(&q("norm.b"))?)?;
        let h = g.linear(h, p.get(&q("expand.w"))?, Some(p.get(&q("expand.b"))?))?;
        let h = match act {
            Activation::Snake => {
                let alpha = g.exp(p.get(&q("act.a"))?);
                g.snake(h, alpha)?
            }
            Activation::Gelu => g.gelu(h),
            Activation::Identity => h,
        };
        let h = g.grn(h, p.get(&q("grn.g"))?, p.get(&q("grn.b"))?)?;
        let h = g.linear(h, p.get(&q("project.w"))?, Some(p.get(&q("project.b"))?))?;
        g.add(x, h)
    }

    fn stack(&self, g: &mut Graph<T>, p: &Bound, name: &str, x: Var, blocks: usize, act: Activation) -> Result<Var> {
        let mut h = g.linear(x, p.get(&format!("{name}.in.w"))?, Some(p.get(&format!("{name}.in.b"))?))?;
        h = g.layer_norm(h, p.get(&format!("{name}.in_norm.g"))?, p.get(&format!("{name}.in_norm.b"))?)?;
        for i in 0..blocks {
            h = self.block(g, p, &format!("{name}.block{i}"), h, act)?;
        }
        g.layer_norm(h, p.get(&format!("{name}.out_norm.g"))?, p.get(&format!("{name}.out_norm.b"))?)
    }

    /// Log-amplitude estimate from the log prior.
    pub fn predict_amplitude(&self, g: &mut Graph<T>, p: &Bound, log_prior: Var, opts: &ForwardOptions<'_, T>) -> Result<Var> {
        self.check_bins(g, log_prior)?;
        let act = self.activation(opts);
        let h = self.stack(g, p, "amp", log_prior, self.cfg.amp_blocks, act)?;
        g.linear(h, p.get("amp.out.w")?, Some(p.get("amp.out.b")?))
    }

    /// Pseudo-real and pseudo-imaginary head outputs.
    pub fn phase_heads(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        log_amp: Var,
        log_prior: Option<Var>,
        opts: &ForwardOptions<'_, T>,
    ) -> Result<(Var, Var)> {
        self.check_bins(g, log_amp)?;
        let mut x = if self.cfg.detach_amplitude { g.detach(log_amp) } else { log_amp };
        if self.cfg.phase_sees_prior {
            let Some(prior) = log_prior else {
                bail!(InvalidInput, "this configuration conditions the phase stack on the prior");
            };
            x = g.concat(x, prior)?;
        }
        let act = self.activation(opts);
        let h = self.stack(g, p, "phase", x, self.cfg.phase_blocks, act)?;
        let re = g.linear(h, p.get("phase.real.w")?, Some(p.get("phase.real.b")?))?;
        let im = g.linear(h, p.get("phase.imag.w")?, Some(p.get("phase.imag.b")?))?;
        match opts.head_hook {
            None => Ok((re, im)),
            Some(hook) => {
                let shape = g.shape(re).to_vec();
                let (mut r, mut i) = (g.value(re).to_vec(), g.value(im).to_vec());
                hook(&mut r, &mut i);
                Ok((g.constant_vec(&shape, r)?, g.constant_vec(&shape, i)?))
            }
        }
    }

    /// Phase in `(−π, π]` from the log-amplitude.
    pub fn predict_phase(
        &self,
        g: &mut Graph<T>,
        p: &Bound,
        log_amp: Var,
        log_prior: Option<Var>,
        opts: &ForwardOptions<'_, T>,
    ) -> Result<Var> {
        let (re, im) = self.phase_heads(g, p, log_amp, log_prior, opts)?;
        phase_from_heads(g, re, im)
    }

    /// Full serial pass from a linear mel `[B, F, K]`.
    pub fn forward(&self, g: &mut Graph<T>, p: &Bound, mel: Var, opts: &ForwardOptions<'_, T>) -> Result<Outputs> {
        let log_prior = self.log_prior(g, p, mel)?;
        let log_amp = self.predict_amplitude(g, p, log_prior, opts)?;
        let phase = self.predict_phase(g, p, log_amp, Some(log_prior), opts)?;
        let amp = g.exp(log_amp);
        let (c, s) = (g.cos(phase), g.sin(phase));
        let re = g.mul(amp, c)?;
        let im = g.mul(amp, s)?;
        Ok(Outputs { log_prior, log_amp, phase, re, im })
    }

    /// Overlap-add buffer `[B, span]` (padded coordinates) for a spectrum.
    pub fn overlap_add(&self, g: &mut Graph<T>, re: Var, im: Var) -> Result<Var> {
        let frames = g.shape(re).get(1).copied().unwrap_or(0);
        let inv = Arc::new(self.fourier.window_sums(frames).1);
        g.synthesize(re, im, &self.fourier, &inv)
    }

    /// Waveform `[B, F·shift]` for a spectrum: overlap-add with the
    /// analysis padding removed.
    pub fn waveform(&self, g: &mut Graph<T>, re: Var, im: Var) -> Result<Var> {
        let frames = g.shape(re).get(1).copied().unwrap_or(0);
        let buf = self.overlap_add(g, re, im)?;
        let sc = &self.cfg.spectral;
        g.slice_last(buf, sc.center_pad(), frames * sc.frame_shift)
    }

    fn check_bins(&self, g: &Graph<T>, v: Var) -> Result<()> {
        let n = self.cfg.spectral.n_freq();
        let s = g.shape(v);
        if s.len() != 3 || s[2] != n {
            bail!(Shape, "expected [B, F, {n}], got {s:?}");
        }
        Ok(())
    }
}

/// Phase `atan2(I, R)` from the parallel head outputs.
pub fn phase_from_heads<T: Real>(g: &mut Graph<T>, re: Var, im: Var) -> Result<Var> {
    g.atan2(im, re)
}
