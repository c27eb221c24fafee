//! Payload codecs and BPSK mapping.
//!
//! The default code is a rate-1/2 sparse parity structure: every
//! information bit feeds three well-separated checks and the parity bits
//! form an accumulator chain, so encoding is a single xor sweep and
//! decoding is hard-decision bit flipping. The construction avoids
//! repeated check pairs (no 4-cycles) and adjacent checks within a column,
//! which makes every single bit flip uniquely correctable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Map bits to antipodal symbols: 0 -> -1.0, 1 -> +1.0.
pub fn modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { -1.0 } else { 1.0 }).collect()
}

/// Hard threshold back to bits; exactly zero counts as +1.
pub fn demodulate(symbols: &[f64]) -> Vec<u8> {
    symbols.iter().map(|&s| if s >= 0.0 { 1 } else { 0 }).collect()
}

pub trait Codec: Send + Sync {
    fn name(&self) -> &str;
    fn rate(&self) -> f64;
    fn info_len(&self) -> usize;
    fn coded_len(&self) -> usize;
    /// Encode exactly `info_len` bits into `coded_len` bits.
    fn encode(&self, info: &[u8]) -> Result<Vec<u8>>;
    /// Best-effort decode of `coded_len` hard symbols back to info bits.
    /// Deterministic for a given input.
    fn decode(&self, symbols: &[f64]) -> Vec<u8>;
}

/// Build the codec named in the config, sized for `n_pd` coded symbols.
pub fn make_codec(cfg: &SystemConfig) -> Result<Box<dyn Codec>> {
    match cfg.codec.as_str() {
        "default-ldpc" => {
            if (cfg.code_rate - 0.5).abs() > 1e-12 {
                return Err(Error::Codec(format!(
                    "default-ldpc is rate 1/2, config says {}",
                    cfg.code_rate
                )));
            }
            Ok(Box::new(BitFlipCode::new(cfg.n_pd)?))
        }
        "uncoded" => {
            if (cfg.code_rate - 1.0).abs() > 1e-12 {
                return Err(Error::Codec(format!(
                    "uncoded carries rate 1, config says {}",
                    cfg.code_rate
                )));
            }
            Ok(Box::new(Uncoded { len: cfg.n_pd }))
        }
        other => Err(Error::Codec(format!("unknown codec '{other}'"))),
    }
}

/// Identity codec: the payload is sent as-is.
pub struct Uncoded {
    len: usize,
}

impl Codec for Uncoded {
    fn name(&self) -> &str {
        "uncoded"
    }
    fn rate(&self) -> f64 {
        1.0
    }
    fn info_len(&self) -> usize {
        self.len
    }
    fn coded_len(&self) -> usize {
        self.len
    }
    fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.len {
            return Err(Error::Codec(format!(
                "expected {} info bits, got {}",
                self.len,
                info.len()
            )));
        }
        Ok(info.to_vec())
    }
    fn decode(&self, symbols: &[f64]) -> Vec<u8> {
        assert_eq!(symbols.len(), self.len, "decode input length");
        demodulate(symbols)
    }
}

const BIT_FLIP_MAX_ITERS: usize = 60;
// Salt for the deterministic graph draw; the structure depends only on n.
const GRAPH_SEED: u64 = 0x5eed_c0de;

/// Rate-1/2 bit-flipping code. Codeword layout: `[info | parity]`.
pub struct BitFlipCode {
    n: usize,
    k: usize,
    /// Three check indices per info column, strictly ascending, gaps >= 2.
    info_checks: Vec<[usize; 3]>,
    /// Info columns attached to each check.
    check_info: Vec<Vec<usize>>,
}

impl BitFlipCode {
    pub fn new(n: usize) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Codec(format!(
                "default-ldpc needs an even coded length of at least 16, got {n}"
            )));
        }
        let k = n / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(GRAPH_SEED ^ n as u64);
        let mut used_pairs: HashSet<(usize, usize)> = HashSet::new();
        let mut info_checks = Vec::with_capacity(k);
        let mut check_info = vec![Vec::new(); k];
        for col in 0..k {
            let triple = draw_triple(k, &mut rng, &used_pairs)?;
            for w in triple.windows(2) {
                used_pairs.insert((w[0], w[1]));
            }
            used_pairs.insert((triple[0], triple[2]));
            for &c in &triple {
                check_info[c].push(col);
            }
            info_checks.push(triple);
            let _ = col;
        }
        Ok(BitFlipCode {
            n,
            k,
            info_checks,
            check_info,
        })
    }

    fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        let (info, parity) = bits.split_at(self.k);
        let mut s = vec![0u8; self.k];
        for (i, si) in s.iter_mut().enumerate() {
            let mut acc = parity[i];
            if i > 0 {
                acc ^= parity[i - 1];
            }
            for &col in &self.check_info[i] {
                acc ^= info[col];
            }
            *si = acc;
        }
        s
    }
}

fn draw_triple(
    k: usize,
    rng: &mut ChaCha8Rng,
    used_pairs: &HashSet<(usize, usize)>,
) -> Result<[usize; 3]> {
    let ok_pairs = |t: &[usize; 3], used: &HashSet<(usize, usize)>| {
        !used.contains(&(t[0], t[1])) && !used.contains(&(t[1], t[2])) && !used.contains(&(t[0], t[2]))
    };
    // First pass insists on gaps of at least two between a column's checks so
    // no parity bit shares two checks with an info bit.
    for relax in [false, true] {
        for _ in 0..400 {
            let mut idx: Vec<usize> = rand::seq::index::sample(rng, k, 3).into_vec();
            idx.sort_unstable();
            let t = [idx[0], idx[1], idx[2]];
            let spaced = t[1] - t[0] >= 2 && t[2] - t[1] >= 2;
            if (spaced || relax) && ok_pairs(&t, used_pairs) {
                return Ok(t);
            }
        }
    }
    Err(Error::Codec(format!(
        "could not place parity checks for block with {k} checks; use a longer n_pd"
    )))
}

impl Codec for BitFlipCode {
    fn name(&self) -> &str {
        "default-ldpc"
    }
    fn rate(&self) -> f64 {
        0.5
    }
    fn info_len(&self) -> usize {
        self.k
    }
    fn coded_len(&self) -> usize {
        self.n
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::Codec(format!(
                "expected {} info bits, got {}",
                self.k,
                info.len()
            )));
        }
        let mut out = Vec::with_capacity(self.n);
        out.extend_from_slice(info);
        let mut prev = 0u8;
        for i in 0..self.k {
            let mut acc = prev;
            for &col in &self.check_info[i] {
                acc ^= info[col];
            }
            out.push(acc);
            prev = acc;
        }
        Ok(out)
    }

    fn decode(&self, symbols: &[f64]) -> Vec<u8> {
        assert_eq!(symbols.len(), self.n, "decode input length");
        let mut bits = demodulate(symbols);
        // Parallel majority rounds knock out scattered flips; a single
        // flipped bit is always cleared in the first round because the
        // graph construction keeps its checks from overlapping anywhere.
        for _ in 0..BIT_FLIP_MAX_ITERS {
            let s = self.syndrome(&bits);
            if s.iter().all(|&v| v == 0) {
                bits.truncate(self.k);
                return bits;
            }
            let mut flips = Vec::new();
            for (col, checks) in self.info_checks.iter().enumerate() {
                let unsat = checks.iter().filter(|&&c| s[c] == 1).count();
                if 2 * unsat > 3 {
                    flips.push(col);
                }
            }
            for j in 0..self.k {
                // Parity j sits in checks j and j+1, except the last one.
                let weight = if j + 1 < self.k { 2 } else { 1 };
                let mut unsat = (s[j] == 1) as usize;
                if j + 1 < self.k {
                    unsat += (s[j + 1] == 1) as usize;
                }
                if 2 * unsat > weight {
                    flips.push(self.k + j);
                }
            }
            if flips.is_empty() {
                break;
            }
            for f in flips {
                bits[f] ^= 1;
            }
        }
        // Greedy descent mops up what the parallel rounds leave or get
        // stuck oscillating on: keep flipping whichever single bit clears
        // the most checks, as long as that strictly shrinks the syndrome.
        let mut s = self.syndrome(&bits);
        let mut weight: usize = s.iter().map(|&v| v as usize).sum();
        while weight > 0 {
            let mut best = None;
            let mut best_gain = 0i64;
            for (col, checks) in self.info_checks.iter().enumerate() {
                let unsat = checks.iter().filter(|&&c| s[c] == 1).count() as i64;
                if 2 * unsat - 3 > best_gain {
                    best_gain = 2 * unsat - 3;
                    best = Some(col);
                }
            }
            for j in 0..self.k {
                let deg = if j + 1 < self.k { 2 } else { 1 };
                let mut unsat = (s[j] == 1) as i64;
                if j + 1 < self.k {
                    unsat += (s[j + 1] == 1) as i64;
                }
                if 2 * unsat - deg > best_gain {
                    best_gain = 2 * unsat - deg;
                    best = Some(self.k + j);
                }
            }
            let Some(bit) = best else { break };
            bits[bit] ^= 1;
            let mut tmp = [0usize; 2];
            let checks: &[usize] = if bit < self.k {
                &self.info_checks[bit]
            } else {
                let j = bit - self.k;
                tmp[0] = j;
                if j + 1 < self.k {
                    tmp[1] = j + 1;
                    &tmp[..2]
                } else {
                    &tmp[..1]
                }
            };
            for &c in checks {
                if s[c] == 1 {
                    weight -= 1;
                } else {
                    weight += 1;
                }
                s[c] ^= 1;
            }
        }
        bits.truncate(self.k);
        bits
    }
}
