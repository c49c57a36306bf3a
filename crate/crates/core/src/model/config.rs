use crate::dsp::SpectralConfig;
use crate::error::{bail, Result};

/// Nonlinearity inside each block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    /// `x + sin²(αx)/α` with a learnable `α` per channel.
    Snake,
    /// Tanh approximation of the Gaussian error linear unit.
    Gelu,
    /// Pass-through; only meant for structural checks.
    Identity,
}

/// Source of the amplitude prior fed to the amplitude stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorKind {
    /// Fixed pseudo-inverse of the mel filterbank.
    PseudoInverse,
    /// Learnable `K × N` matrix in place of the pseudo-inverse.
    LearnableLinear,
}

macro_rules! text_enum {
    ($ty:ident { $($var:ident => $s:literal),+ $(,)? }) => {
        impl ::std::fmt::Display for $ty {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(match self { $($ty::$var => $s),+ })
            }
        }

        impl ::std::str::FromStr for $ty {
            type Err = $crate::error::Error;

            fn from_str(s: &str) -> $crate::error::Result<Self> {
                match s {
                    $($s => Ok($ty::$var),)+
                    _ => Err($crate::error::Error::Config(format!(
                        "unknown {} '{s}' (expected one of: {})",
                        stringify!($ty),
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}
pub(crate) use text_enum;

text_enum!(Activation { Snake => "snake", Gelu => "gelu", Identity => "identity" });
text_enum!(PriorKind { PseudoInverse => "pseudo_inverse", LearnableLinear => "learnable_linear" });

/// Network dimensions and structural switches.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub spectral: SpectralConfig,
    /// Hidden width `C`.
    pub channels: usize,
    /// Expansion factor `h` of the inner pointwise layer.
    pub expansion: usize,
    /// Depthwise kernel length (odd).
    pub kernel: usize,
    pub amp_blocks: usize,
    pub phase_blocks: usize,
    pub activation: Activation,
    pub prior: PriorKind,
    /// Concatenate the log prior to the phase stack input.
    pub phase_sees_prior: bool,
    /// Stop gradients from the phase stack into the amplitude estimate.
    pub detach_amplitude: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            spectral: SpectralConfig::default(),
            channels: 512,
            expansion: 4,
            kernel: 7,
            amp_blocks: 1,
            phase_blocks: 4,
            activation: Activation::Snake,
            prior: PriorKind::PseudoInverse,
            phase_sees_prior: false,
            detach_amplitude: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.spectral.validate()?;
        if self.channels == 0 || self.expansion == 0 {
            bail!(Config, "channels and expansion must be positive");
        }
        if self.kernel % 2 == 0 {
            bail!(Config, "kernel must be odd, got {}", self.kernel);
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.channels * self.expansion
    }
}
