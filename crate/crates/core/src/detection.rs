//! Validity screening of estimated channel columns against the original
//! per-pilot estimates, broadcast vector construction, and the UE-side
//! detection statistic.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::sic::{CsiSet, FactorEstimates};

/// Outcome of screening every channel column: per-column per-phase
/// correlation profiles, the resulting flags, and the accepted index set.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    /// `correlations[column][phase][pilot]`.
    pub correlations: Vec<Vec<Vec<f64>>>,
    pub valid: Vec<bool>,
    /// Indices of valid columns, ascending.
    pub accepted: Vec<usize>,
}

/// A column is genuine when in every phase exactly one pilot estimate
/// correlates with it near unity: a real UE occupies one pilot per phase,
/// a collision column lights up too many cells or none, and a fabricated
/// column lights up none.
///
/// The per-pilot estimates must be the original ones, before any
/// peeling-stage cancellation.
pub fn validate(csi: &CsiSet, fe: &FactorEstimates, cfg: &SystemConfig) -> ValidityReport {
    let m = fe.m as f64;
    let lo = 1.0 - cfg.valid_threshold;
    let hi = 1.0 + cfg.valid_threshold;
    let mut correlations = Vec::with_capacity(csi.len());
    let mut valid = Vec::with_capacity(csi.len());
    let mut accepted = Vec::new();
    for (u, col) in csi.columns.iter().enumerate() {
        let mut per_phase = Vec::with_capacity(fe.l);
        let mut ok = true;
        for l in 0..fe.l {
            let row: Vec<f64> = (0..fe.tau_p).map(|t| fe.h[l][t].dot(col) / m).collect();
            let hits = row.iter().filter(|&&c| c > lo && c < hi).count();
            if hits != 1 {
                ok = false;
            }
            per_phase.push(row);
        }
        correlations.push(per_phase);
        valid.push(ok);
        if ok {
            accepted.push(u);
        }
    }
    ValidityReport {
        correlations,
        valid,
        accepted,
    }
}

/// Broadcast vector: the sum of all accepted channel columns.
pub fn build_rar(csi: &CsiSet, report: &ValidityReport) -> DVector<f64> {
    let m = csi.columns.first().map_or(0, |c| c.len());
    let mut v = DVector::zeros(m);
    for &u in &report.accepted {
        v += &csi.columns[u];
    }
    v
}

/// The UE correlates the broadcast vector with its own channel and
/// normalizes: near one when its channel was accepted, near zero
/// otherwise. Declares detection above one half.
pub fn ue_self_detect<R: Rng + ?Sized>(
    v: &DVector<f64>,
    g: &DVector<f64>,
    beta: f64,
    noise_var: f64,
    rng: &mut R,
) -> (bool, f64) {
    let m = g.len() as f64;
    let w: f64 = rng.sample::<f64, _>(StandardNormal) * noise_var.sqrt();
    let r = beta.sqrt() * v.dot(g) + w;
    let statistic = r / (beta.sqrt() * m);
    (statistic > 0.5, statistic)
}
