//! The classifier stage that runs after peeling: estimate how many UEs
//! remain, strip the recovered messages out of the superimposed block,
//! separate the leftovers with a bank of randomized fixed-point ICA
//! runs, repair the sign ambiguity with the reference symbol, cluster
//! the decoded candidates, vote per bit position, and re-estimate the
//! channel of each voted message.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::codec::{demodulate, modulate, Codec};
use crate::error::{Error, Result};
use crate::sic::{CsiSet, DecodedMessage, FactorEstimates};

/// Estimated number of active UEs, from the total energy across one
/// phase's pilot estimates with the known noise floor removed.
pub fn estimate_active_count(fe: &FactorEstimates, phase: usize, noise_var: f64) -> usize {
    let total: f64 = fe.h[phase]
        .iter()
        .map(|h| h.norm_squared() / fe.m as f64)
        .sum();
    (total - fe.tau_p as f64 * noise_var).round().max(0.0) as usize
}

/// UEs the peeler did not resolve.
pub fn remaining_count(n_a_hat: usize, n_sic: usize) -> usize {
    n_a_hat.saturating_sub(n_sic)
}

/// Reconstruct each recovered message as a full ±1 sequence (reference
/// symbol reattached) and cancel it from the superimposed block.
pub fn residual(
    ym: &DMatrix<f64>,
    csi: &CsiSet,
    decoded: &[Option<DecodedMessage>],
    codec: &dyn Codec,
) -> Result<DMatrix<f64>> {
    if csi.len() != decoded.len() {
        return Err(Error::Dimension(format!(
            "{} channel columns but {} decoded messages",
            csi.len(),
            decoded.len()
        )));
    }
    let mut out = ym.clone();
    for (h, msg) in csi.columns.iter().zip(decoded) {
        let Some(msg) = msg else { continue };
        let v = reconstruct_sequence(&msg.info_bits, codec)?;
        for (j, &vj) in v.iter().enumerate() {
            for i in 0..out.nrows() {
                out[(i, j)] -= h[i] * vj;
            }
        }
    }
    Ok(out)
}

fn reconstruct_sequence(info_bits: &[u8], codec: &dyn Codec) -> Result<Vec<f64>> {
    let coded = codec.encode(info_bits)?;
    let mut v = Vec::with_capacity(coded.len() + 1);
    v.push(1.0);
    v.extend(modulate(&coded));
    Ok(v)
}

/// One randomized classifier run: which rows it drew, the separated
/// sequences it produced, and how hard it had to work.
#[derive(Debug, Clone)]
pub struct IcaRun {
    pub rows: Vec<usize>,
    pub outputs: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

const ICA_MAX_ITERS: usize = 200;
const ICA_TOL: f64 = 1e-6;
const RANK_EPS: f64 = 1e-12;

/// Inverse matrix square root through the eigendecomposition, refusing
/// matrices that are numerically rank deficient. A positive `ridge` is
/// added to every eigenvalue after the rank check, so genuine degeneracy
/// is still rejected while mere ill conditioning gets regularized.
fn inv_sqrt_sym(a: DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let eig = a.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if !(max > 0.0) {
        return None;
    }
    let mut d = DMatrix::zeros(eig.eigenvalues.len(), eig.eigenvalues.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= RANK_EPS * max {
            return None;
        }
        d[(i, i)] = 1.0 / (ev + ridge).sqrt();
    }
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Center the rows and whiten them to unit sample covariance. The ridge
/// should sit at the per-sample noise variance: directions whose energy
/// is pure noise then stop being amplified to unit scale, while genuine
/// signal directions, which dominate the noise floor, pass through
/// essentially unchanged. Noise-free data takes ridge zero and whitens
/// exactly.
fn whiten(x: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    let n = x.ncols() as f64;
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
    let cov = &xc * xc.transpose() / n;
    let w = inv_sqrt_sym(cov, ridge)?;
    Some(w * xc)
}

fn ica_once<R: Rng + ?Sized>(
    ym_res: &DMatrix<f64>,
    n_r_hat: usize,
    noise_var: f64,
    rng: &mut R,
) -> IcaRun {
    let m = ym_res.nrows();
    let rows = rand::seq::index::sample(rng, m, n_r_hat).into_vec();
    let mut x = DMatrix::zeros(n_r_hat, ym_res.ncols());
    for (i, &r) in rows.iter().enumerate() {
        x.row_mut(i).copy_from(&ym_res.row(r));
    }
    let failed = |rows: Vec<usize>| IcaRun {
        rows,
        outputs: Vec::new(),
        iterations: 0,
        converged: false,
    };
    let Some(z) = whiten(&x, noise_var) else {
        return failed(rows);
    };
    if n_r_hat == 1 {
        // A single source needs no unmixing: the whitened row already is
        // the normalized selection, sign resolved later.
        return IcaRun {
            outputs: vec![z.row(0).transpose()],
            rows,
            iterations: 0,
            converged: true,
        };
    }
    let n = z.ncols() as f64;
    let zt = z.transpose();
    // Random orthonormal start.
    let seed = DMatrix::from_fn(n_r_hat, n_r_hat, |_, _| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let mut w = seed.qr().q();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < ICA_MAX_ITERS {
        iterations += 1;
        // Kurtosis-seeking update for sub-Gaussian sources, applied to
        // all directions at once, then re-orthogonalized symmetrically.
        let y = &w * &z;
        let g = y.map(|v| v * v * v);
        let mut w_new = g * &zt / n;
        w_new -= 3.0 * &w;
        let Some(orth) = inv_sqrt_sym(&w_new * w_new.transpose(), 0.0) else {
            return failed(rows);
        };
        let w_next = orth * w_new;
        let mut delta: f64 = 0.0;
        for i in 0..n_r_hat {
            let d = 1.0 - w_next.row(i).dot(&w.row(i)).abs();
            delta = delta.max(d);
        }
        w = w_next;
        if delta < ICA_TOL {
            converged = true;
            break;
        }
    }
    let y = &w * z;
    let outputs = (0..n_r_hat).map(|i| y.row(i).transpose()).collect();
    IcaRun {
        rows,
        outputs,
        iterations,
        converged,
    }
}

/// Run the full classifier bank: `n_i` independent randomized runs over
/// the residual block. `noise_var` regularizes the per-run whitening, see
/// [`whiten`]. Runs that cannot whiten their selection come back empty
/// and unconverged.
pub fn ica_bank<R: Rng + ?Sized>(
    ym_res: &DMatrix<f64>,
    n_r_hat: usize,
    n_i: usize,
    noise_var: f64,
    rng: &mut R,
) -> Vec<IcaRun> {
    if n_r_hat == 0 || n_r_hat > ym_res.nrows() {
        return Vec::new();
    }
    (0..n_i)
        .map(|_| ica_once(ym_res, n_r_hat, noise_var, rng))
        .collect()
}

/// Resolve the sign ambiguity of a separated sequence using its first
/// sample as the reference: a non-negative first sample keeps the
/// sequence, a negative one negates it.
pub fn fix_phase(f: &DVector<f64>) -> DVector<f64> {
    if f[0] < 0.0 {
        -f
    } else {
        f.clone()
    }
}

/// Clustered hard-decision payloads with their per-position vote tallies.
#[derive(Debug, Clone, Default)]
pub struct ClusterSet {
    /// Payload bit sequence that seeded each class.
    pub seeds: Vec<Vec<u8>>,
    /// All member payloads assigned to each class.
    pub classes: Vec<Vec<Vec<u8>>>,
    /// Per-position sums of 2b-1 over members.
    pub accum: Vec<Vec<i64>>,
}

/// A per-class voting result: the majority payload bits and the decoded
/// information bits behind them.
#[derive(Debug, Clone)]
pub struct VotedMessage {
    pub coded_bits: Vec<u8>,
    pub info_bits: Vec<u8>,
}

fn pack_bits(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

fn hamming_packed(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Cluster every separated output by Hamming distance to the seed class
/// payloads (the first converged run), vote per position, and decode the
/// majority payload of each class. With no converged run the result is
/// empty.
pub fn cluster_and_vote(
    runs: &[IcaRun],
    n_r_hat: usize,
    codec: &dyn Codec,
) -> (Vec<VotedMessage>, ClusterSet) {
    let Some(first) = runs.iter().find(|r| r.converged) else {
        return (Vec::new(), ClusterSet::default());
    };
    let payload_of = |f: &DVector<f64>| -> Vec<u8> {
        let fixed = fix_phase(f);
        let symbols: Vec<f64> = fixed.iter().skip(1).copied().collect();
        demodulate(&symbols)
    };
    let seeds: Vec<Vec<u8>> = first.outputs.iter().map(payload_of).collect();
    let packed_seeds: Vec<Vec<u64>> = seeds.iter().map(|s| pack_bits(s)).collect();
    let n_classes = seeds.len().min(n_r_hat);
    let mut set = ClusterSet {
        seeds: seeds[..n_classes].to_vec(),
        classes: vec![Vec::new(); n_classes],
        accum: Vec::new(),
    };
    for s in &set.seeds {
        set.accum.push(vec![0i64; s.len()]);
    }
    for run in runs {
        for f in &run.outputs {
            let bits = payload_of(f);
            let packed = pack_bits(&bits);
            let mut best = 0usize;
            let mut best_d = u32::MAX;
            for (j, ps) in packed_seeds[..n_classes].iter().enumerate() {
                let d = hamming_packed(&packed, ps);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            for (acc, &b) in set.accum[best].iter_mut().zip(&bits) {
                *acc += 2 * b as i64 - 1;
            }
            set.classes[best].push(bits);
        }
    }
    let mut voted = Vec::with_capacity(n_classes);
    for acc in &set.accum {
        // A tied position votes 1, matching the sign convention of the
        // demodulator at exactly zero.
        let symbols: Vec<f64> = acc.iter().map(|&a| a as f64).collect();
        let coded_bits = demodulate(&symbols);
        let info_bits = codec.decode(&symbols);
        voted.push(VotedMessage {
            coded_bits,
            info_bits,
        });
    }
    (voted, set)
}

/// Re-estimate the channel of a voted message by correlating its
/// reconstructed ±1 sequence against the residual block.
pub fn csi_from_message(
    ym_res: &DMatrix<f64>,
    info_bits: &[u8],
    codec: &dyn Codec,
) -> Result<DVector<f64>> {
    let v = reconstruct_sequence(info_bits, codec)?;
    if v.len() != ym_res.ncols() {
        return Err(Error::Dimension(format!(
            "sequence length {} vs block width {}",
            v.len(),
            ym_res.ncols()
        )));
    }
    let vv = DVector::from_vec(v);
    Ok(ym_res * &vv / vv.norm_squared())
}
