//! System parameters shared by the simulator and the analytical tools.
//!
//! A config file is a TOML table whose keys are exactly the field names of
//! [`SystemConfig`]. Unknown keys are rejected so typos fail loudly instead
//! of silently running a different experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which orthonormal pilot set the base station hands out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotBookKind {
    /// Standard basis vectors. Works for any `tau_p`.
    Identity,
    /// Normalized Hadamard columns. Requires `tau_p` to be a power of two.
    Hadamard,
}

fn default_codec() -> String {
    "default-ldpc".to_string()
}
fn default_pilot_book() -> PilotBookKind {
    PilotBookKind::Identity
}
fn default_sic_max_iters() -> usize {
    50
}
fn default_degree_tol() -> f64 {
    0.3
}
fn default_dup_threshold() -> f64 {
    0.5
}
fn default_valid_threshold() -> f64 {
    0.3
}
fn default_de_iters() -> usize {
    1000
}

/// Full parameter set for one random-access slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Base-station antenna count.
    pub m: usize,
    /// Number of active UEs in the slot.
    pub na: usize,
    /// Orthogonal pilots available per sub-pilot phase.
    pub tau_p: usize,
    /// Sub-pilot phases per super pilot.
    pub l: usize,
    /// Independent classifier (ICA) runs on the residual signal.
    pub n_i: usize,
    /// Transmit SNR in dB; the noise variance is `10^(-snr_db/10)`.
    pub snr_db: f64,
    /// Coded payload length in symbols.
    pub n_pd: usize,
    /// Code rate of the payload codec, in (0, 1].
    pub code_rate: f64,
    /// Payload codec selected by name.
    #[serde(default = "default_codec")]
    pub codec: String,
    #[serde(default = "default_pilot_book")]
    pub pilot_book: PilotBookKind,
    /// Cap on peeling passes over the factor nodes.
    #[serde(default = "default_sic_max_iters")]
    pub sic_max_iters: usize,
    /// Half-width of the acceptance window for the degree-1 test.
    #[serde(default = "default_degree_tol")]
    pub degree_tol: f64,
    /// Normalized-correlation level above which two recovered channel
    /// columns are treated as the same UE.
    #[serde(default = "default_dup_threshold")]
    pub dup_threshold: f64,
    /// Half-width of the near-1 window used by the validity check.
    #[serde(default = "default_valid_threshold")]
    pub valid_threshold: f64,
    /// Iteration cap for the density-evolution recursion.
    #[serde(default = "default_de_iters")]
    pub de_iters: usize,
    /// Master seed; trial t runs on an independent stream seeded `seed ^ t`.
    pub seed: u64,
}

impl SystemConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Noise variance per real dimension implied by `snr_db`.
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Modulated message length: payload plus one reference symbol.
    pub fn n_m(&self) -> usize {
        self.n_pd + 1
    }

    /// Information bits carried per payload.
    pub fn info_len(&self) -> usize {
        (self.n_pd as f64 * self.code_rate).round() as usize
    }

    /// Super-pilot length plus the reference symbol; the non-payload part
    /// of the frame that every scheme under comparison pays for.
    pub fn overhead(&self) -> usize {
        self.tau_p * self.l + 1
    }

    pub fn validate(&self) -> Result<()> {
        fn req(ok: bool, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        }
        req(self.m >= 1, "m must be at least 1")?;
        req(self.na >= 1, "na must be at least 1")?;
        req(self.tau_p >= 1, "tau_p must be at least 1")?;
        req(self.l >= 1, "l must be at least 1")?;
        req(self.n_i >= 1, "n_i must be at least 1")?;
        req(self.n_pd >= 2, "n_pd must be at least 2")?;
        req(
            self.code_rate > 0.0 && self.code_rate <= 1.0,
            "code_rate must lie in (0, 1]",
        )?;
        req(self.info_len() >= 1, "n_pd * code_rate rounds to zero bits")?;
        req(
            self.degree_tol > 0.0 && self.degree_tol < 1.0,
            "degree_tol must lie in (0, 1)",
        )?;
        req(
            self.dup_threshold > 0.0 && self.dup_threshold < 1.0,
            "dup_threshold must lie in (0, 1)",
        )?;
        req(
            self.valid_threshold > 0.0 && self.valid_threshold < 1.0,
            "valid_threshold must lie in (0, 1)",
        )?;
        req(self.sic_max_iters >= 1, "sic_max_iters must be at least 1")?;
        req(self.de_iters >= 1, "de_iters must be at least 1")?;
        req(self.snr_db.is_finite(), "snr_db must be finite")?;
        if self.pilot_book == PilotBookKind::Hadamard {
            req(
                self.tau_p.is_power_of_two(),
                "hadamard pilot book needs tau_p to be a power of two",
            )?;
        }
        Ok(())
    }
}
