use std::io;

/// Error kinds shared by every stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("ShapeError: {0}")]
    Shape(String),
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("NumericalError: {0}")]
    Numerical(String),
    #[error("FormatError: {0}")]
    Format(String),
    #[error("IoError: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
