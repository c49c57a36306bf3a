//! AdamW with decoupled weight decay.

use super::tensor::Tensor;
use crate::error::{bail, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Multiplicative learning-rate decay applied per step; 1 disables it.
    pub lr_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.8, beta2: 0.99, eps: 1e-8, weight_decay: 0.01, lr_decay: 1.0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!(Config, "learning rate must be positive, got {}", self.lr);
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                bail!(Config, "{name} must lie in [0, 1), got {b}");
            }
        }
        if !(self.eps >= 0.0) || !(self.weight_decay >= 0.0) {
            bail!(Config, "eps and weight_decay must be non-negative");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            bail!(Config, "lr_decay must lie in (0, 1], got {}", self.lr_decay);
        }
        Ok(())
    }

    /// Learning rate used for update number `t` (1-based).
    pub fn lr_at(&self, t: u64) -> f64 {
        self.lr * self.lr_decay.powf(t.saturating_sub(1) as f64)
    }
}

/// Moments and step count for one list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState<T> {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Real> OptimState<T> {
    /// Zero moments shaped like `params`.
    pub fn new(config: AdamConfig, params: &[Tensor<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self { config, t: 0, m: zeros(), v: zeros() }
    }
}

/// One AdamW update of `params` in place. Gradients are checked for
/// non-finite entries before anything is modified.
pub fn adamw_step<T: Real>(params: &mut [Tensor<T>], grads: &[Vec<T>], state: &mut OptimState<T>) -> Result<()> {
    state.config.validate()?;
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        bail!(
            Shape,
            "adamw: {} parameters, {} gradients, {} moment tensors",
            params.len(),
            grads.len(),
            state.m.len()
        );
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.numel() != g.len() || state.m[i].shape() != p.shape() || state.v[i].shape() != p.shape() {
            bail!(Shape, "adamw: parameter {i} has shape {:?} but gradient/moments differ", p.shape());
        }
        if let Some(bad) = g.iter().find(|x| !x.is_finite()) {
            bail!(Numerical, "non-finite gradient {bad} for parameter {i}; step aborted");
        }
    }
    let cfg = &state.config;
    let t = state.t + 1;
    let lr = cfg.lr_at(t);
    let bc1 = 1.0 - cfg.beta1.powf(t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(t as f64);
    let decay = 1.0 - lr * cfg.weight_decay;
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (state.m[i].data_mut(), state.v[i].data_mut());
        for (k, x) in p.data_mut().iter_mut().enumerate() {
            let gk = g[k].as_f64();
            let mk = cfg.beta1 * m[k].as_f64() + (1.0 - cfg.beta1) * gk;
            let vk = cfg.beta2 * v[k].as_f64() + (1.0 - cfg.beta2) * gk * gk;
            m[k] = T::lit(mk);
            v[k] = T::lit(vk);
            let update = (mk / bc1) / ((vk / bc2).sqrt() + cfg.eps);
            *x = T::lit(x.as_f64() * decay - lr * update);
        }
    }
    state.t = t;
    Ok(())
}
