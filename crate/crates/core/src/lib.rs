//! Link-level simulator and analytical toolkit for a grant-free random
//! access scheme that spreads each UE over several pilot phases, peels
//! collision-free pilots with successive interference cancellation, and
//! separates the leftover collided UEs with an ICA-based classifier bank.

pub mod analysis;
pub mod baselines;
pub mod cica;
pub mod codec;
pub mod config;
pub mod detection;
pub mod error;
pub mod harness;
pub mod model;
pub mod sic;

pub use config::{PilotBookKind, SystemConfig};
pub use error::{Error, Result};
