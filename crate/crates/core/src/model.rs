//! Uplink model: pilot books, random super pilots, modulated messages,
//! i.i.d. Gaussian channels, and the received baseband blocks.
//!
//! Each active UE picks one pilot per sub-pilot phase, uniformly and
//! independently, which induces a bipartite contention graph between UEs
//! and (phase, pilot) factor nodes. The same UE also transmits a BPSK
//! message whose first symbol is a fixed +1 reference.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::codec::Codec;
use crate::config::{PilotBookKind, SystemConfig};
use crate::error::{Error, Result};

/// Orthonormal pilot set for one sub-pilot phase; column `t` is pilot `t+1`.
#[derive(Debug, Clone)]
pub struct PilotBook {
    s: DMatrix<f64>,
}

impl PilotBook {
    pub fn new(kind: PilotBookKind, tau_p: usize) -> Result<Self> {
        match kind {
            PilotBookKind::Identity => Ok(Self::identity(tau_p)),
            PilotBookKind::Hadamard => Self::hadamard(tau_p),
        }
    }

    pub fn identity(tau_p: usize) -> Self {
        PilotBook {
            s: DMatrix::identity(tau_p, tau_p),
        }
    }

    /// Sylvester construction scaled to unit columns.
    pub fn hadamard(tau_p: usize) -> Result<Self> {
        if !tau_p.is_power_of_two() {
            return Err(Error::Config(format!(
                "hadamard book needs a power-of-two size, got {tau_p}"
            )));
        }
        let mut h = DMatrix::from_element(1, 1, 1.0);
        while h.nrows() < tau_p {
            let n = h.nrows();
            let mut next = DMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    let v = h[(i, j)];
                    next[(i, j)] = v;
                    next[(i, j + n)] = v;
                    next[(i + n, j)] = v;
                    next[(i + n, j + n)] = -v;
                }
            }
            h = next;
        }
        h /= (tau_p as f64).sqrt();
        Ok(PilotBook { s: h })
    }

    pub fn tau_p(&self) -> usize {
        self.s.ncols()
    }

    /// Pilot `t` (1-based, matching the indices stored in frames).
    pub fn column(&self, t: usize) -> DVector<f64> {
        assert!(
            t >= 1 && t <= self.tau_p(),
            "pilot index {t} outside 1..={}",
            self.tau_p()
        );
        self.s.column(t - 1).into_owned()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }
}

/// Channel vectors for every active UE, one column per UE; entries are
/// i.i.d. standard normal so the effective per-UE receive power is one.
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub g: DMatrix<f64>,
}

impl ChannelState {
    pub fn sample<R: Rng + ?Sized>(m: usize, na: usize, rng: &mut R) -> Self {
        let mut g = DMatrix::zeros(m, na);
        for k in 0..na {
            for i in 0..m {
                g[(i, k)] = rng.sample(StandardNormal);
            }
        }
        ChannelState { g }
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn na(&self) -> usize {
        self.g.ncols()
    }

    pub fn ue(&self, k: usize) -> DVector<f64> {
        self.g.column(k).into_owned()
    }
}

/// One UE's transmission: pilot choices, information bits, and the
/// modulated message `v` (reference symbol first, then BPSK payload).
#[derive(Debug, Clone)]
pub struct UplinkFrame {
    /// Pilot index per phase, each in `1..=tau_p`.
    pub subpilot_idx: Vec<usize>,
    pub info_bits: Vec<u8>,
    pub v: Vec<f64>,
}

impl UplinkFrame {
    /// Assemble a frame from already-chosen pilot indices and payload bits.
    pub fn assemble(subpilot_idx: Vec<usize>, info_bits: Vec<u8>, codec: &dyn Codec) -> Result<Self> {
        let coded = codec.encode(&info_bits)?;
        let mut v = Vec::with_capacity(coded.len() + 1);
        v.push(1.0);
        v.extend(crate::codec::modulate(&coded));
        Ok(UplinkFrame {
            subpilot_idx,
            info_bits,
            v,
        })
    }
}

/// Draw every active UE's pilot selections and payload.
///
/// All pilot indices are drawn before any payload bits, so the contention
/// graph produced by a given seed depends only on `na`, `l`, and `tau_p`.
pub fn build_frames<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    codec: &dyn Codec,
    rng: &mut R,
) -> Result<Vec<UplinkFrame>> {
    let mut selections = Vec::with_capacity(cfg.na);
    for _ in 0..cfg.na {
        let idx: Vec<usize> = (0..cfg.l).map(|_| rng.random_range(1..=cfg.tau_p)).collect();
        selections.push(idx);
    }
    let k = codec.info_len();
    selections
        .into_iter()
        .map(|idx| {
            let bits: Vec<u8> = (0..k).map(|_| rng.random_range(0..2u8)).collect();
            UplinkFrame::assemble(idx, bits, codec)
        })
        .collect()
}

/// Received pilot blocks (one `m x tau_p` matrix per phase) and the
/// received message block (`m x n_m`).
#[derive(Debug, Clone)]
pub struct ReceivedBlock {
    pub yp: Vec<DMatrix<f64>>,
    pub ym: DMatrix<f64>,
    pub noise_var: f64,
}

/// Superimpose every UE's pilots and message over its channel and add
/// white Gaussian noise of variance `cfg.noise_var()`.
pub fn synthesize<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    book: &PilotBook,
    frames: &[UplinkFrame],
    channel: &ChannelState,
    rng: &mut R,
) -> Result<ReceivedBlock> {
    if frames.len() != channel.na() {
        return Err(Error::Dimension(format!(
            "{} frames but {} channel columns",
            frames.len(),
            channel.na()
        )));
    }
    if book.tau_p() != cfg.tau_p {
        return Err(Error::Dimension(format!(
            "pilot book size {} does not match tau_p {}",
            book.tau_p(),
            cfg.tau_p
        )));
    }
    let n_m = cfg.n_m();
    for (k, f) in frames.iter().enumerate() {
        if f.subpilot_idx.len() != cfg.l {
            return Err(Error::Dimension(format!("frame {k} has wrong phase count")));
        }
        if f.v.len() != n_m {
            return Err(Error::Dimension(format!(
                "frame {k} message length {} != {}",
                f.v.len(),
                n_m
            )));
        }
        if f.subpilot_idx.iter().any(|&t| t < 1 || t > cfg.tau_p) {
            return Err(Error::Dimension(format!("frame {k} pilot index out of range")));
        }
    }

    let m = channel.m();
    let na = frames.len();
    let sigma = cfg.noise_var().sqrt();

    let mut yp = Vec::with_capacity(cfg.l);
    for phase in 0..cfg.l {
        // Pilot rows for this phase: row k is UE k's chosen pilot transposed.
        let mut p = DMatrix::zeros(na, cfg.tau_p);
        for (k, f) in frames.iter().enumerate() {
            let t = f.subpilot_idx[phase];
            p.row_mut(k).copy_from(&book.column(t).transpose());
        }
        let mut y = &channel.g * &p;
        for j in 0..cfg.tau_p {
            for i in 0..m {
                let z: f64 = rng.sample(StandardNormal);
                y[(i, j)] += sigma * z;
            }
        }
        yp.push(y);
    }

    let mut vt = DMatrix::zeros(na, n_m);
    for (k, f) in frames.iter().enumerate() {
        for (j, &s) in f.v.iter().enumerate() {
            vt[(k, j)] = s;
        }
    }
    let mut ym = &channel.g * &vt;
    for j in 0..n_m {
        for i in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            ym[(i, j)] += sigma * z;
        }
    }

    Ok(ReceivedBlock {
        yp,
        ym,
        noise_var: cfg.noise_var(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::make_codec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(na: usize, tau_p: usize, l: usize, snr_db: f64) -> SystemConfig {
        SystemConfig {
            m: 16,
            na,
            tau_p,
            l,
            n_i: 2,
            snr_db,
            n_pd: 64,
            code_rate: 0.5,
            codec: "default-ldpc".into(),
            pilot_book: PilotBookKind::Identity,
            sic_max_iters: 50,
            degree_tol: 0.3,
            dup_threshold: 0.5,
            valid_threshold: 0.3,
            de_iters: 100,
            seed: 0,
        }
    }

    #[test]
    fn pilot_books_have_orthonormal_columns() {
        for book in [PilotBook::identity(5), PilotBook::hadamard(8).unwrap()] {
            let s = book.matrix();
            let gram = s.transpose() * s;
            let tau = book.tau_p();
            for i in 0..tau {
                for j in 0..tau {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (gram[(i, j)] - want).abs() < 1e-12,
                        "gram[{i},{j}] = {}",
                        gram[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn hadamard_rejects_non_power_of_two() {
        assert!(PilotBook::hadamard(6).is_err());
    }

    #[test]
    fn single_pilot_forces_all_selections_to_one() {
        let cfg = cfg(4, 1, 2, 10.0);
        let codec = make_codec(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let frames = build_frames(&cfg, codec.as_ref(), &mut rng).unwrap();
        for f in &frames {
            assert_eq!(f.subpilot_idx, vec![1, 1]);
        }
    }

    #[test]
    fn frames_carry_reference_symbol_and_coded_payload() {
        let cfg = cfg(3, 4, 2, 10.0);
        let codec = make_codec(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames = build_frames(&cfg, codec.as_ref(), &mut rng).unwrap();
        assert_eq!(frames.len(), 3);
        for f in &frames {
            assert_eq!(f.v.len(), cfg.n_m());
            assert_eq!(f.v[0], 1.0);
            assert!(f.v.iter().all(|&s| s == 1.0 || s == -1.0));
            assert_eq!(f.info_bits.len(), cfg.info_len());
        }
    }

    #[test]
    fn seeded_selections_reproduce_the_reference_topology() {
        // Five UEs over three pilots and two phases: UEs 1 and 2 share
        // pilot 1 in phase 1, UEs 4 and 5 share pilot 3 in both phases,
        // UE 3 sits alone on pilot 2 then collides with UE 1 on pilot 1.
        let cfg = cfg(5, 3, 2, 10.0);
        let codec = make_codec(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2727);
        let frames = build_frames(&cfg, codec.as_ref(), &mut rng).unwrap();
        let got: Vec<Vec<usize>> = frames.iter().map(|f| f.subpilot_idx.clone()).collect();
        let want = vec![
            vec![1, 1],
            vec![1, 3],
            vec![2, 1],
            vec![3, 3],
            vec![3, 3],
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn selections_are_uniform_over_pilots() {
        // Chi-square style check: every (phase, pilot) cell within 3 binomial
        // standard deviations of the expected count.
        let cfg = cfg(1, 3, 2, 10.0);
        let codec = make_codec(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 30_000usize;
        let mut counts = vec![[0usize; 3]; cfg.l];
        for _ in 0..n {
            let frames = build_frames(&cfg, codec.as_ref(), &mut rng).unwrap();
            for (phase, &t) in frames[0].subpilot_idx.iter().enumerate() {
                counts[phase][t - 1] += 1;
            }
        }
        let p = 1.0 / 3.0;
        let mean = n as f64 * p;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for phase in 0..cfg.l {
            for t in 0..3 {
                let c = counts[phase][t] as f64;
                assert!(
                    (c - mean).abs() <= 3.0 * sd,
                    "cell ({phase},{t}) count {c} vs mean {mean:.1}"
                );
            }
        }
    }

    #[test]
    fn noise_free_superposition_is_exact() {
        let mut cfg = cfg(2, 3, 2, 200.0);
        cfg.m = 8;
        let codec = make_codec(&cfg).unwrap();
        let book = PilotBook::identity(cfg.tau_p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Both UEs on pilot 2 in phase 1; distinct pilots in phase 2.
        let f0 = UplinkFrame::assemble(vec![2, 1], vec![0; codec.info_len()], codec.as_ref()).unwrap();
        let f1 = UplinkFrame::assemble(vec![2, 3], vec![1; codec.info_len()], codec.as_ref()).unwrap();
        let channel = ChannelState::sample(cfg.m, 2, &mut rng);
        let block = synthesize(&cfg, &book, &[f0.clone(), f1.clone()], &channel, &mut rng).unwrap();

        let g0 = channel.ue(0);
        let g1 = channel.ue(1);
        // Identity book: phase-1 column 2 holds the sum of both channels.
        let col = block.yp[0].column(1);
        for i in 0..cfg.m {
            assert!((col[i] - (g0[i] + g1[i])).abs() < 1e-9);
        }
        // Phase-2 columns separate the two UEs.
        for i in 0..cfg.m {
            assert!((block.yp[1].column(0)[i] - g0[i]).abs() < 1e-9);
            assert!((block.yp[1].column(2)[i] - g1[i]).abs() < 1e-9);
            assert!(block.yp[1].column(1)[i].abs() < 1e-9);
        }
        // Message block column j sums g_k * v_k[j].
        for j in [0usize, 1, 17] {
            for i in 0..cfg.m {
                let want = g0[i] * f0.v[j] + g1[i] * f1.v[j];
                assert!((block.ym[(i, j)] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noise_matches_requested_moments() {
        // Empty system: the received blocks are pure noise.
        let mut cfg = cfg(1, 4, 1, 3.0);
        cfg.m = 50;
        cfg.n_pd = 1998;
        let book = PilotBook::identity(cfg.tau_p);
        let channel = ChannelState {
            g: DMatrix::zeros(cfg.m, 0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let block = synthesize(&cfg, &book, &[], &channel, &mut rng).unwrap();
        let want_var = cfg.noise_var();
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let mut n = 0usize;
        for y in block.yp.iter().chain(std::iter::once(&block.ym)) {
            for v in y.iter() {
                sum += v;
                sumsq += v * v;
                n += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(n > 90_000);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - want_var).abs() / want_var < 0.05, "var {var} want {want_var}");
    }

    #[test]
    fn synthesize_is_linear_in_the_ue_set() {
        // Same rng for both halves and for the union, so the noise draw is
        // shared and the union equals the sum minus one noise realization.
        let cfg = cfg(4, 3, 2, 10.0);
        let codec = make_codec(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let frames = build_frames(&cfg, codec.as_ref(), &mut rng).unwrap();
        let channel = ChannelState::sample(cfg.m, 4, &mut rng);
        let noise_rng = ChaCha8Rng::seed_from_u64(999);

        let whole = synthesize(&cfg, &PilotBook::identity(3), &frames, &channel, &mut noise_rng.clone())
            .unwrap();
        let mut cfg_a = cfg.clone();
        cfg_a.na = 2;
        let chan_a = ChannelState {
            g: channel.g.columns(0, 2).into_owned(),
        };
        let chan_b = ChannelState {
            g: channel.g.columns(2, 2).into_owned(),
        };
        let part_a = synthesize(
            &cfg_a,
            &PilotBook::identity(3),
            &frames[..2],
            &chan_a,
            &mut noise_rng.clone(),
        )
        .unwrap();
        let part_b = synthesize(
            &cfg_a,
            &PilotBook::identity(3),
            &frames[2..],
            &chan_b,
            &mut noise_rng.clone(),
        )
        .unwrap();

        let diff = (&whole.ym - (&part_a.ym + &part_b.ym - noise_only(&cfg_a, &mut noise_rng.clone())))
            .abs()
            .max();
        assert!(diff < 1e-9, "max deviation {diff}");
    }

    fn noise_only(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let channel = ChannelState {
            g: DMatrix::zeros(cfg.m, 0),
        };
        synthesize(cfg, &PilotBook::identity(cfg.tau_p), &[], &channel, rng)
            .unwrap()
            .ym
    }

    #[test]
    fn favorable_propagation_margins() {
        // Cross-correlations shrink like 1/sqrt(m) while self-correlations
        // concentrate at one.
        for m in [100usize, 400, 1600] {
            let mut rng = ChaCha8Rng::seed_from_u64(4242);
            let bound = 5.0 / (m as f64).sqrt();
            for _ in 0..200 {
                let a = ChannelState::sample(m, 1, &mut rng).ue(0);
                let b = ChannelState::sample(m, 1, &mut rng).ue(0);
                let cross = (a.dot(&b) / m as f64).abs();
                let self_dev = (a.norm_squared() / m as f64 - 1.0).abs();
                assert!(cross <= bound, "m={m} cross {cross} > {bound}");
                assert!(self_dev <= bound, "m={m} self deviation {self_dev} > {bound}");
            }
        }
    }
}
