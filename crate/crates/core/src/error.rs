//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Rejected configuration field or combination of fields.
    #[error("invalid config: {0}")]
    Config(String),

    /// Codec construction or usage failure (bad length, unknown name).
    #[error("codec: {0}")]
    Codec(String),

    /// Operands whose shapes or index ranges do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Malformed config or sweep file.
    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
