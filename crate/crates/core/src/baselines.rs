//! Comparison schemes: classic single-pilot random access over a matched
//! pilot budget, and an optimistic stand-in for multi-preamble access that
//! counts a UE as served whenever its full pilot tuple is unique.

use rand::Rng;

use crate::analysis::throughput;
use crate::model::UplinkFrame;

/// Result of running a comparison scheme on one set of active UEs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BaselineOutcome {
    pub successes: usize,
    pub per_ue: Vec<bool>,
    pub throughput: f64,
}

impl BaselineOutcome {
    fn from_flags(per_ue: Vec<bool>, n_pd: usize, code_rate: f64, pilot_len: usize) -> Self {
        let successes = per_ue.iter().filter(|s| **s).count();
        let gamma = throughput(successes as f64, n_pd, code_rate, pilot_len + 1);
        BaselineOutcome {
            successes,
            per_ue,
            throughput: gamma,
        }
    }
}

/// Single-pilot access: every UE draws one pilot from a pool whose size
/// (and hence sequence length) matches the combined sub-pilot budget, and
/// only a singly occupied pilot yields a decodable message.
pub fn traditional_ra<R: Rng + ?Sized>(
    na: usize,
    pool: usize,
    n_pd: usize,
    code_rate: f64,
    rng: &mut R,
) -> BaselineOutcome {
    assert!(pool > 0, "empty pilot pool");
    let picks: Vec<usize> = (0..na).map(|_| rng.random_range(0..pool)).collect();
    let mut occupancy = vec![0usize; pool];
    for &p in &picks {
        occupancy[p] += 1;
    }
    let per_ue: Vec<bool> = picks.iter().map(|&p| occupancy[p] == 1).collect();
    BaselineOutcome::from_flags(per_ue, n_pd, code_rate, pool)
}

/// Optimistic multi-preamble proxy: a UE is served iff no other active UE
/// picked the same tuple of sub-pilots across all phases. The real scheme
/// also loses UEs to rank deficiencies among distinct tuples, so this
/// upper-bounds it; treat the resulting curves as a ceiling, not a
/// reproduction.
pub fn multipreamble_approx(
    frames: &[UplinkFrame],
    tau_p: usize,
    n_pd: usize,
    code_rate: f64,
) -> BaselineOutcome {
    let l = frames.first().map_or(0, |f| f.subpilot_idx.len());
    let per_ue: Vec<bool> = frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            frames
                .iter()
                .enumerate()
                .all(|(j, other)| j == k || other.subpilot_idx != f.subpilot_idx)
        })
        .collect();
    BaselineOutcome::from_flags(per_ue, n_pd, code_rate, tau_p * l)
}
