use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Activation, ModelConfig, PriorKind};
use crate::autodiff::Tensor;
use crate::error::{bail, Result};
use crate::real::Real;

const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Name, shape and initializer of every parameter, in storage order.
pub(crate) fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let n = cfg.spectral.n_freq();
    let k_mel = cfg.spectral.mel_bins;
    let (c, hc) = (cfg.channels, cfg.hidden());
    let mut out = Vec::new();
    let mut add = |name: String, shape: Vec<usize>, init: Init| out.push((name, shape, init));
    if cfg.prior == PriorKind::LearnableLinear {
        add("prior.w".into(), vec![k_mel, n], Init::Normal);
    }
    let stack = |add: &mut dyn FnMut(String, Vec<usize>, Init), name: &str, n_in: usize, blocks: usize| {
        add(format!("{name}.in.w"), vec![n_in, c], Init::Normal);
        add(format!("{name}.in.b"), vec![c], Init::Zeros);
        add(format!("{name}.in_norm.g"), vec![c], Init::Ones);
        add(format!("{name}.in_norm.b"), vec![c], Init::Zeros);
        for i in 0..blocks {
            let p = format!("{name}.block{i}");
            add(format!("{p}.dw.w"), vec![c, cfg.kernel], Init::Normal);
            add(format!("{p}.dw.b"), vec![c], Init::Zeros);
            add(format!("{p}.norm.g"), vec![c], Init::Ones);
            add(format!("{p}.norm.b"), vec![c], Init::Zeros);
            add(format!("{p}.expand.w"), vec![c, hc], Init::Normal);
            add(format!("{p}.expand.b"), vec![hc], Init::Zeros);
            if cfg.activation == Activation::Snake {
                // Log-frequency: alpha = exp(a) starts at 1.
                add(format!("{p}.act.a"), vec![hc], Init::Zeros);
            }
            add(format!("{p}.grn.g"), vec![hc], Init::Zeros);
            add(format!("{p}.grn.b"), vec![hc], Init::Zeros);
            add(format!("{p}.project.w"), vec![hc, c], Init::Normal);
            add(format!("{p}.project.b"), vec![c], Init::Zeros);
        }
        add(format!("{name}.out_norm.g"), vec![c], Init::Ones);
        add(format!("{name}.out_norm.b"), vec![c], Init::Zeros);
    };
    stack(&mut add, "amp", n, cfg.amp_blocks);
    add("amp.out.w".into(), vec![c, n], Init::Normal);
    add("amp.out.b".into(), vec![n], Init::Zeros);
    let phase_in = if cfg.phase_sees_prior { 2 * n } else { n };
    stack(&mut add, "phase", phase_in, cfg.phase_blocks);
    add("phase.real.w".into(), vec![c, n], Init::Normal);
    add("phase.real.b".into(), vec![n], Init::Zeros);
    add("phase.imag.w".into(), vec![c, n], Init::Normal);
    add("phase.imag.b".into(), vec![n], Init::Zeros);
    out
}

/// Named parameter tensors in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Real> ModelParams<T> {
    /// Fresh parameters: truncated normal (σ = 0.02, cut at 2σ) for
    /// weights, zeros for biases and gates, ones for norm gains.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, init) in layout(cfg) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
                Init::Normal => (0..n)
                    .map(|_| loop {
                        let z: f64 = normal.sample(&mut rng);
                        if z.abs() <= 2.0 * INIT_STD {
                            break T::lit(z);
                        }
                    })
                    .collect(),
            };
            names.push(name);
            tensors.push(Tensor::new(&shape, data)?);
        }
        Ok(Self { names, tensors })
    }

    /// Assembles parameters from named tensors, checking them against the
    /// layout implied by `cfg`.
    pub fn from_named(cfg: &ModelConfig, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let expected = layout(cfg);
        let mut by_name: std::collections::HashMap<String, Tensor<T>> = named.into_iter().collect();
        let mut names = Vec::new();
        let mut tensors = Vec::new();
        for (name, shape, _) in expected {
            let Some(t) = by_name.remove(&name) else {
                bail!(Format, "missing tensor '{name}' for this configuration");
            };
            if t.shape() != shape.as_slice() {
                bail!(Format, "tensor '{name}' has shape {:?}, configuration expects {shape:?}", t.shape());
            }
            names.push(name);
            tensors.push(t);
        }
        if let Some(extra) = by_name.keys().min() {
            bail!(Format, "tensor '{extra}' is not part of this configuration");
        }
        Ok(Self { names, tensors })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams { names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }
}
