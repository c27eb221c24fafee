//! Analytical companion to the simulator: degree distributions of the
//! contention graph, density evolution for the peeling decoder, a
//! matched-filter error-probability bound, and the closed-form success
//! and throughput bounds assembled from those pieces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, Discrete};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Node- and edge-perspective degree distributions of the bipartite
/// contention graph. Variable nodes (UEs) all have degree `l`; factor
/// nodes (pilots) are binomially occupied.
#[derive(Debug, Clone)]
pub struct DegreeDistributions {
    pub na: usize,
    pub tau_p: usize,
    pub l: usize,
    /// Factor-node degree probabilities, index 0..=na.
    pub psi: Vec<f64>,
    /// Edge-perspective factor distribution, index 0..=na (entry 0 unused).
    pub rho: Vec<f64>,
}

pub fn degree_distributions(na: usize, tau_p: usize, l: usize) -> Result<DegreeDistributions> {
    if na < 1 || tau_p < 1 || l < 1 {
        return Err(Error::Config(
            "degree distributions need na, tau_p, l all at least 1".into(),
        ));
    }
    let p = 1.0 / tau_p as f64;
    let bin = Binomial::new(p, na as u64).map_err(|e| Error::Config(e.to_string()))?;
    let psi: Vec<f64> = (0..=na).map(|d| bin.pmf(d as u64)).collect();
    let mean: f64 = psi.iter().enumerate().map(|(d, &w)| w * d as f64).sum();
    let mut rho = vec![0.0; na + 1];
    for d in 1..=na {
        rho[d] = psi[d] * d as f64 / mean;
    }
    Ok(DegreeDistributions {
        na,
        tau_p,
        l,
        psi,
        rho,
    })
}

impl DegreeDistributions {
    /// Edge-perspective variable polynomial; a point mass at degree `l`.
    pub fn lambda_eval(&self, x: f64) -> f64 {
        x.powi(self.l as i32 - 1)
    }

    /// Node-perspective variable polynomial.
    pub fn big_lambda_eval(&self, x: f64) -> f64 {
        x.powi(self.l as i32)
    }

    /// Edge-perspective factor polynomial `sum_d rho_d x^(d-1)`.
    pub fn rho_eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for d in (1..=self.na).rev() {
            acc = acc * x + self.rho[d];
        }
        acc
    }
}

/// Run the peeling-decoder fixed-point recursion.
///
/// Returns the `(m_i, n_i)` trajectory and the asymptotic per-UE failure
/// probability. Iteration stops early once successive `m` values agree to
/// within 1e-12.
pub fn evolve(dd: &DegreeDistributions, iters: usize) -> (Vec<(f64, f64)>, f64) {
    let mut trajectory = Vec::new();
    let mut m_prev = 1.0f64;
    let mut n_last = 1.0f64;
    for _ in 0..iters {
        let n = 1.0 - dd.rho_eval(1.0 - m_prev);
        let m = dd.lambda_eval(n);
        trajectory.push((m, n));
        n_last = n;
        if (m_prev - m).abs() < 1e-12 {
            break;
        }
        m_prev = m;
    }
    (trajectory, dd.big_lambda_eval(n_last))
}

/// Empirical counterpart of [`evolve`]: draw random contention graphs,
/// peel them with full index knowledge, and report the fraction of UEs
/// left unrecovered. This is exact graph peeling, independent of any
/// channel-estimation effects.
pub fn peel_failure_monte_carlo(
    na: usize,
    tau_p: usize,
    l: usize,
    n_graphs: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_factors = tau_p * l;
    let mut failed = 0usize;
    let mut count = vec![0usize; n_factors];
    let mut acc = vec![0usize; n_factors];
    let mut edges = vec![0usize; na * l];
    for _ in 0..n_graphs {
        count.fill(0);
        acc.fill(0);
        for ue in 0..na {
            for phase in 0..l {
                let f = phase * tau_p + rng.random_range(0..tau_p);
                edges[ue * l + phase] = f;
                count[f] += 1;
                acc[f] ^= ue;
            }
        }
        let mut stack: Vec<usize> = (0..n_factors).filter(|&f| count[f] == 1).collect();
        let mut recovered = 0usize;
        while let Some(f) = stack.pop() {
            if count[f] != 1 {
                continue;
            }
            let ue = acc[f];
            recovered += 1;
            for phase in 0..l {
                let ff = edges[ue * l + phase];
                count[ff] -= 1;
                acc[ff] ^= ue;
                if count[ff] == 1 {
                    stack.push(ff);
                }
            }
        }
        failed += na - recovered;
    }
    failed as f64 / (na * n_graphs) as f64
}

/// Genie-aided error probability of a one-shot BPSK decision after
/// maximum-ratio combining over `m` antennas with unit-variance noise:
/// the average of `erfc(sqrt(y))/2` over a chi-square variable `y` with
/// `m` degrees of freedom. Decreases monotonically in `m`.
pub fn ber_lower_bound(m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::Config("ber_lower_bound needs m >= 1".into()));
    }
    let mf = m as f64;
    // After substituting y = u^2 the integrand is smooth down to zero:
    // u^(m-1) exp(-u^2/2) erfc(u) / (2^(m/2 - 1) Gamma(m/2)).
    let ln_norm = -(mf / 2.0 - 1.0) * std::f64::consts::LN_2 - ln_gamma(mf / 2.0);
    let integrand = move |u: f64| -> f64 {
        if u <= 0.0 {
            // erfc(0) = 1 and u^0 = 1; for m > 1 the power term vanishes.
            return if m == 1 { ln_norm.exp() } else { 0.0 };
        }
        let ln_w = (mf - 1.0) * u.ln() - 0.5 * u * u + ln_norm;
        let e = erfc(u);
        if e == 0.0 {
            return 0.0;
        }
        (ln_w + e.ln()).exp()
    };
    // Chi-square tail cutoff: beyond y = m + 2 sqrt(m x) + 2x the tail mass
    // is below e^(-x).
    let x = 36.0;
    let y_max = mf + 2.0 * (mf * x).sqrt() + 2.0 * x;
    let u_max = y_max.sqrt().max(9.0);
    let value = adaptive_gauss_kronrod(&integrand, 0.0, u_max, 1e-10);
    Ok(0.5 * value)
}

// 15-point Kronrod extension of 7-point Gauss on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        k += WGK[j] * fsum;
        if j % 2 == 1 {
            g += WG[j / 2] * fsum;
        }
    }
    (k * half, (k - g).abs() * half.abs())
}

/// Recursive bisection with a per-interval absolute error budget.
pub fn adaptive_gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, e) = gk15(f, a, b);
        if e <= tol || depth >= 50 {
            return v;
        }
        let mid = 0.5 * (a + b);
        rec(f, a, mid, 0.5 * tol, depth + 1) + rec(f, mid, b, 0.5 * tol, depth + 1)
    }
    rec(f, a, b, tol, 0)
}

/// Closed-form performance figures assembled from the graph analysis and
/// the matched-filter bound.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvolutionResult {
    pub trajectory: Vec<(f64, f64)>,
    /// Asymptotic probability that peeling alone misses a UE.
    pub p_fail: f64,
    /// Matched-filter floor on the per-symbol error probability.
    pub p_e_l: f64,
    /// Expected UEs recovered by peeling.
    pub s_sic: f64,
    /// Upper bound on the chance that a full message survives the
    /// classifier stage error-free.
    pub p_cica_u: f64,
    /// Expected UEs recovered by the classifier stage, upper bound.
    pub s_cica_u: f64,
    /// Per-UE success probability, upper bound.
    pub p_s_u: f64,
    /// Per-UE missed-detection probability, lower bound.
    pub p_md_l: f64,
    /// Normalized throughput upper bound.
    pub gamma_u: f64,
}

/// Throughput of `successes` recovered payloads given the shared frame
/// overhead (super pilot plus reference symbol).
pub fn throughput(successes: f64, n_pd: usize, code_rate: f64, overhead: usize) -> f64 {
    successes * n_pd as f64 * code_rate / (n_pd as f64 + overhead as f64)
}

pub fn compose_bounds(
    cfg: &SystemConfig,
    trajectory: Vec<(f64, f64)>,
    p_fail: f64,
    p_e_l: f64,
) -> EvolutionResult {
    let na = cfg.na as f64;
    let s_sic = na * (1.0 - p_fail);
    let p_cica_u = (1.0 - p_e_l).powi(cfg.n_m() as i32);
    let s_cica_u = p_cica_u * (na - s_sic);
    let p_s_u = (1.0 - p_fail) + p_cica_u * p_fail;
    let p_md_l = 1.0 - p_s_u;
    let gamma_u = throughput(na * p_s_u, cfg.n_pd, cfg.code_rate, cfg.overhead());
    EvolutionResult {
        trajectory,
        p_fail,
        p_e_l,
        s_sic,
        p_cica_u,
        s_cica_u,
        p_s_u,
        p_md_l,
        gamma_u,
    }
}

/// Full analysis for one configuration.
pub fn analyze(cfg: &SystemConfig) -> Result<EvolutionResult> {
    let dd = degree_distributions(cfg.na, cfg.tau_p, cfg.l)?;
    let (trajectory, p_fail) = evolve(&dd, cfg.de_iters);
    let p_e_l = ber_lower_bound(cfg.m)?;
    Ok(compose_bounds(cfg, trajectory, p_fail, p_e_l))
}
