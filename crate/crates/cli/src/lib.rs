//! Command implementations behind the `serialvoc` binary, plus the WAV
//! and MELB file formats they read and write.

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err(serialvoc_core::Error::$kind(format!($($arg)*)))
    };
}

pub mod commands;
pub mod melb;
pub mod wav;

pub use commands::Failure;
