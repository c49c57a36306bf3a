//! Parameter and arithmetic cost accounting.

use super::config::ModelConfig;
use super::params::layout;

/// Multiply-accumulates per frame of a 1-D convolution.
pub fn conv_macs(c_in: usize, c_out: usize, kernel: usize, groups: usize) -> u64 {
    (c_out * (c_in / groups) * kernel) as u64
}

/// Exact parameter count implied by `cfg`, without allocating.
pub fn param_count(cfg: &ModelConfig) -> usize {
    layout(cfg).iter().map(|(_, s, _)| s.iter().product::<usize>()).sum()
}

/// Frames covering `duration_s` seconds.
pub fn frames_for_duration(cfg: &ModelConfig, duration_s: f64) -> u64 {
    let sc = &cfg.spectral;
    (duration_s * sc.sample_rate_hz as f64 / sc.frame_shift as f64).ceil() as u64
}

/// Multiply-accumulates per frame over the prior projection and every
/// convolution and linear layer. Normalizations, activations and the
/// inverse transform are not counted.
pub fn macs_per_frame(cfg: &ModelConfig) -> u64 {
    let n = cfg.spectral.n_freq();
    let k_mel = cfg.spectral.mel_bins;
    let (c, hc) = (cfg.channels, cfg.hidden());
    let block = conv_macs(c, c, cfg.kernel, c) + conv_macs(c, hc, 1, 1) + conv_macs(hc, c, 1, 1);
    let phase_in = if cfg.phase_sees_prior { 2 * n } else { n };
    conv_macs(k_mel, n, 1, 1)
        + conv_macs(n, c, 1, 1)
        + cfg.amp_blocks as u64 * block
        + conv_macs(c, n, 1, 1)
        + conv_macs(phase_in, c, 1, 1)
        + cfg.phase_blocks as u64 * block
        + 2 * conv_macs(c, n, 1, 1)
}

pub fn count_macs(cfg: &ModelConfig, duration_s: f64) -> u64 {
    macs_per_frame(cfg) * frames_for_duration(cfg, duration_s)
}

/// Floating-point operations (two per multiply-accumulate) to generate
/// `duration_s` seconds.
pub fn count_flops(cfg: &ModelConfig, duration_s: f64) -> u64 {
    2 * count_macs(cfg, duration_s)
}
