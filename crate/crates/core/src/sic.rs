//! Channel estimation and the peeling stage: least-squares per-pilot
//! estimates, degree estimation by autocorrelation, iterative harvesting
//! of collision-free pilots with cancellation, duplicate merging, and
//! message decoding from the harvested channel vectors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::codec::{demodulate, Codec};
use crate::config::SystemConfig;
use crate::model::{PilotBook, ReceivedBlock};

/// Per-pilot channel estimates for every phase, together with the current
/// residual degree bookkeeping used by the peeler.
#[derive(Debug, Clone)]
pub struct FactorEstimates {
    pub m: usize,
    pub l: usize,
    pub tau_p: usize,
    pub noise_var: f64,
    /// `h[phase][pilot]`, each a length-`m` vector.
    pub h: Vec<Vec<DVector<f64>>>,
    /// Estimated residual degree per factor node.
    pub deg: Vec<Vec<usize>>,
}

impl FactorEstimates {
    pub fn estimate(&self, phase: usize, pilot: usize) -> &DVector<f64> {
        &self.h[phase][pilot]
    }
}

/// Least-squares estimate per phase and pilot: despread each received
/// pilot block against the codebook column. With an identity book this
/// is just the received columns.
pub fn ls_estimates(block: &ReceivedBlock, book: &PilotBook) -> FactorEstimates {
    let l = block.yp.len();
    let m = block.ym.nrows();
    let tau_p = book.tau_p();
    let mut h = Vec::with_capacity(l);
    let mut deg = Vec::with_capacity(l);
    for yp in &block.yp {
        let mut row_h = Vec::with_capacity(tau_p);
        let mut row_d = Vec::with_capacity(tau_p);
        for t in 1..=tau_p {
            let est = yp * book.column(t);
            row_d.push(degree_of(&est, block.noise_var));
            row_h.push(est);
        }
        h.push(row_h);
        deg.push(row_d);
    }
    FactorEstimates {
        m,
        l,
        tau_p,
        noise_var: block.noise_var,
        h,
        deg,
    }
}

/// Estimated number of UEs superimposed on a channel estimate: the
/// per-antenna energy, corrected for the known noise floor, rounded to
/// the nearest count and clamped at zero.
pub fn degree_of(h: &DVector<f64>, noise_var: f64) -> usize {
    let e = h.norm_squared() / h.len() as f64 - noise_var;
    e.round().max(0.0) as usize
}

/// A factor node is harvestable only when its corrected energy sits
/// inside an acceptance window around one.
pub fn is_degree_one(h: &DVector<f64>, noise_var: f64, degree_tol: f64) -> bool {
    let e = h.norm_squared() / h.len() as f64 - noise_var;
    (e - 1.0).abs() < degree_tol
}

/// Where a recovered channel column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CsiSource {
    Sic,
    Cica,
}

/// Recovered channel columns with their provenance tags.
#[derive(Debug, Clone, Default)]
pub struct CsiSet {
    pub columns: Vec<DVector<f64>>,
    pub source: Vec<CsiSource>,
}

impl CsiSet {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn push(&mut self, column: DVector<f64>, source: CsiSource) {
        self.columns.push(column);
        self.source.push(source);
    }

    pub fn sic_count(&self) -> usize {
        self.source.iter().filter(|s| **s == CsiSource::Sic).count()
    }

    pub fn cica_count(&self) -> usize {
        self.source.iter().filter(|s| **s == CsiSource::Cica).count()
    }
}

/// Diagnostic record of one peeling run, kept small enough to serialize
/// into per-trial output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PeelTrace {
    pub iterations: usize,
    /// Harvested factor nodes in order, as 1-based (phase, pilot) pairs.
    pub harvests: Vec<(usize, usize)>,
    pub merged_duplicates: usize,
}

/// Iteratively harvest factor nodes whose corrected energy says a single
/// UE remains, cancel each harvested column out of every other node that
/// visibly loses exactly one member, and merge duplicate harvests.
pub fn peel(fe: &FactorEstimates, cfg: &SystemConfig) -> (CsiSet, PeelTrace) {
    let mut h = fe.h.clone();
    let mut deg = fe.deg.clone();
    let m = fe.m as f64;
    let mut harvested: Vec<DVector<f64>> = Vec::new();
    let mut trace = PeelTrace::default();

    while trace.iterations < cfg.sic_max_iters {
        let mut found = None;
        'scan: for l in 0..fe.l {
            for t in 0..fe.tau_p {
                if is_degree_one(&h[l][t], fe.noise_var, cfg.degree_tol) {
                    found = Some((l, t));
                    break 'scan;
                }
            }
        }
        let Some((l, t)) = found else { break };
        trace.iterations += 1;
        trace.harvests.push((l + 1, t + 1));
        let v = std::mem::replace(&mut h[l][t], DVector::zeros(fe.m));
        deg[l][t] = 0;
        for ll in 0..fe.l {
            for tt in 0..fe.tau_p {
                if (ll == l && tt == t) || deg[ll][tt] == 0 {
                    continue;
                }
                let cand = &h[ll][tt] - &v;
                let nd = degree_of(&cand, fe.noise_var);
                // Accept the cancellation only when the node visibly lost
                // exactly one member; anything else is a false subtraction.
                if nd + 1 == deg[ll][tt] {
                    h[ll][tt] = cand;
                    deg[ll][tt] = nd;
                }
            }
        }
        harvested.push(v);
    }

    let mut csi = CsiSet::default();
    for v in harvested {
        let dup = csi
            .columns
            .iter()
            .any(|k| (k.dot(&v)).abs() / m > cfg.dup_threshold);
        if dup {
            trace.merged_duplicates += 1;
        } else {
            csi.push(v, CsiSource::Sic);
        }
    }
    (csi, trace)
}

/// One decoded uplink message: the equalized symbol estimates (reference
/// symbol first) and the decoded information bits.
#[derive(Debug, Clone)]
pub struct DecodedMessage {
    pub symbols: Vec<f64>,
    pub info_bits: Vec<u8>,
}

/// Matched-filter equalization of the message block against each channel
/// column, followed by payload decoding. Columns with vanishing norm are
/// rejected as `None`.
pub fn decode_from_csi(
    ym: &DMatrix<f64>,
    csi: &CsiSet,
    codec: &dyn Codec,
) -> Vec<Option<DecodedMessage>> {
    csi.columns
        .iter()
        .map(|h| {
            let denom = h.norm_squared();
            if denom.sqrt() < 1e-9 {
                return None;
            }
            let x = ym.transpose() * h / denom;
            let symbols: Vec<f64> = x.iter().copied().collect();
            if symbols.len() != codec.coded_len() + 1 {
                return None;
            }
            let info_bits = codec.decode(&symbols[1..]);
            // Confidence gate: a genuine equalized message sits on (or a few
            // flips away from) the codeword the decoder lands on, while a
            // column that actually covers a collision equalizes to a mixture
            // far from every codeword. Refusing those keeps their junk out of
            // the cancellation stage.
            let hard = demodulate(&symbols[1..]);
            match codec.encode(&info_bits) {
                Ok(coded) => {
                    let dist = coded
                        .iter()
                        .zip(&hard)
                        .filter(|(a, b)| a != b)
                        .count();
                    if dist * 20 > coded.len() * 3 {
                        return None;
                    }
                }
                Err(_) => return None,
            }
            Some(DecodedMessage { symbols, info_bits })
        })
        .collect()
}

/// Hard-decision view of the equalized symbols after the reference symbol.
pub fn payload_bits(msg: &DecodedMessage) -> Vec<u8> {
    demodulate(&msg.symbols[1..])
}
