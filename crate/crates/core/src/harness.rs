//! Monte Carlo driver: runs whole trials end to end, aggregates metrics
//! per configuration, sweeps configuration grids, and persists CSV/JSON
//! results with a reproducibility contract (same seed, same bytes).

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, throughput, EvolutionResult};
use crate::baselines::{multipreamble_approx, traditional_ra, BaselineOutcome};
use crate::cica::{
    cluster_and_vote, csi_from_message, estimate_active_count, ica_bank, remaining_count,
    residual,
};
use crate::codec::make_codec;
use crate::config::SystemConfig;
use crate::detection::validate;
use crate::error::{Error, Result};
use crate::model::{build_frames, synthesize, ChannelState, PilotBook};
use crate::sic::{decode_from_csi, ls_estimates, peel, CsiSource, PeelTrace};

/// Per-trial performance of the proposed scheme.
///
/// `runtime` is wall-clock seconds for the trial and is deliberately left
/// out of anything persisted to disk, so that reruns of the same seed
/// produce identical files.
#[derive(Debug, Clone, Serialize)]
pub struct TrialMetrics {
    pub s_sic: usize,
    pub s_cica: usize,
    pub successes: usize,
    pub p_s: f64,
    pub p_md: f64,
    /// Mean of the squared channel estimation error per antenna, taken
    /// over the UEs that were successfully recovered; NaN when none were.
    pub mse: f64,
    pub throughput: f64,
    #[serde(skip)]
    pub runtime: f64,
}

/// Everything worth keeping from one trial: the proposed scheme's
/// metrics, the paired comparison schemes run on the same activity
/// pattern, and screening diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub metrics: TrialMetrics,
    pub traditional: BaselineOutcome,
    pub multipreamble_approx: BaselineOutcome,
    /// Size of the accepted column set after validity screening.
    pub accepted: usize,
    pub column_valid: Vec<bool>,
    /// Columns the screen accepted that match no true UE.
    pub false_valid: usize,
    /// Columns matching a true UE that the screen rejected.
    pub missed_valid: usize,
    /// Estimated active count and how many of those peeling left behind.
    pub n_a_hat: usize,
    pub n_r_hat: usize,
    pub n_i: usize,
    pub converged_runs: usize,
    pub peel: PeelTrace,
}

/// Greedy one-to-one assignment of estimated columns to true channels by
/// cosine similarity, refusing any pair at or below `threshold`.
fn match_columns(
    columns: &[nalgebra::DVector<f64>],
    channel: &ChannelState,
    threshold: f64,
) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (u, col) in columns.iter().enumerate() {
        let cn = col.norm();
        if cn < 1e-12 {
            continue;
        }
        for k in 0..channel.na() {
            let g = channel.ue(k);
            let cos = col.dot(&g) / (cn * g.norm());
            if cos.is_finite() && cos > threshold {
                pairs.push((cos, u, k));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matched = vec![None; columns.len()];
    let mut ue_taken = vec![false; channel.na()];
    for (_, u, k) in pairs {
        if matched[u].is_none() && !ue_taken[k] {
            matched[u] = Some(k);
            ue_taken[k] = true;
        }
    }
    matched
}

/// One full trial: draw activity, synthesize the air interface, peel,
/// separate the residual, screen every recovered column, and score
/// against ground truth. The comparison schemes run on the same draw.
pub fn run_trial<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<TrialRecord> {
    let t0 = Instant::now();
    let codec = make_codec(cfg)?;
    let book = PilotBook::new(cfg.pilot_book, cfg.tau_p)?;
    let frames = build_frames(cfg, codec.as_ref(), rng)?;
    let channel = ChannelState::sample(cfg.m, cfg.na, rng);
    let block = synthesize(cfg, &book, &frames, &channel, rng)?;

    let fe = ls_estimates(&block, &book);
    let (mut sic_csi, peel_trace) = peel(&fe, cfg);
    let decoded_sic = decode_from_csi(&block.ym, &sic_csi, codec.as_ref());
    // A harvest whose amplitude drifted (cancellation chains under noise eat
    // into the column) still equalizes and decodes fine, but it fails the
    // screen and leaves part of the UE's signal behind after cancellation.
    // Re-estimate such columns from the message itself at full scale.
    for (i, msg) in decoded_sic.iter().enumerate() {
        let Some(msg) = msg else { continue };
        let scale = sic_csi.columns[i].norm_squared() / cfg.m as f64;
        if !(0.6..=1.5).contains(&scale) {
            if let Ok(col) = csi_from_message(&block.ym, &msg.info_bits, codec.as_ref()) {
                sic_csi.columns[i] = col;
            }
        }
    }

    // Each phase gives an independent read of the activity level; averaging
    // them halves the variance of the count the classifier is sized by.
    let phase_counts: usize = (0..cfg.l)
        .map(|p| estimate_active_count(&fe, p, block.noise_var))
        .sum();
    let n_a_hat = (phase_counts + cfg.l / 2) / cfg.l;
    // Only messages that decoded are cancelled from the block, so the
    // classifier must model everything else as still present.
    let n_sic_s = decoded_sic.iter().filter(|d| d.is_some()).count();
    let n_r_hat = remaining_count(n_a_hat, n_sic_s).min(cfg.m);
    let ym_res = residual(&block.ym, &sic_csi, &decoded_sic, codec.as_ref())?;
    let runs = ica_bank(&ym_res, n_r_hat, cfg.n_i, block.noise_var, rng);
    let converged_runs = runs.iter().filter(|r| r.converged).count();
    let (voted, _classes) = cluster_and_vote(&runs, n_r_hat, codec.as_ref());

    let mut all_csi = sic_csi;
    let mut payloads: Vec<Option<Vec<u8>>> = decoded_sic
        .into_iter()
        .map(|d| d.map(|msg| msg.info_bits))
        .collect();
    for msg in &voted {
        let col = csi_from_message(&ym_res, &msg.info_bits, codec.as_ref())?;
        all_csi.push(col, CsiSource::Cica);
        payloads.push(Some(msg.info_bits.clone()));
    }

    let report = validate(&all_csi, &fe, cfg);
    let matched = match_columns(&all_csi.columns, &channel, cfg.dup_threshold);

    // Success is bookkept per UE: a UE is served when any accepted column
    // lies along its channel and carries its payload. Near-duplicates of
    // one channel are common (a harvest with a few flipped bits next to
    // the separator's clean recovery) and only one of them has to be
    // right, so a one-to-one assignment would undercount.
    let m = cfg.m as f64;
    let mut s_sic = 0usize;
    let mut s_cica = 0usize;
    let mut err_sum = 0.0;
    for (k, frame) in frames.iter().enumerate() {
        let g = channel.ue(k);
        let gn = g.norm();
        let mut best = cfg.dup_threshold;
        let mut server = None;
        for (u, col) in all_csi.columns.iter().enumerate() {
            if !report.valid[u] {
                continue;
            }
            if payloads[u].as_deref() != Some(frame.info_bits.as_slice()) {
                continue;
            }
            let cn = col.norm();
            if cn < 1e-12 {
                continue;
            }
            let cos = col.dot(&g) / (cn * gn);
            if cos.is_finite() && cos > best {
                best = cos;
                server = Some(u);
            }
        }
        if let Some(u) = server {
            match all_csi.source[u] {
                CsiSource::Sic => s_sic += 1,
                CsiSource::Cica => s_cica += 1,
            }
            err_sum += (&all_csi.columns[u] - g).norm_squared() / m;
        }
    }
    // The column-level diagnostics stay payload blind: greedy one-to-one
    // matching flags accepted columns with no channel behind them and
    // true channels the screen rejected.
    let mut false_valid = 0usize;
    let mut missed_valid = 0usize;
    for (u, hit) in matched.iter().enumerate() {
        match (hit, report.valid[u]) {
            (None, true) => false_valid += 1,
            (Some(_), false) => missed_valid += 1,
            _ => {}
        }
    }
    let successes = s_sic + s_cica;
    let p_s = successes as f64 / cfg.na as f64;
    let metrics = TrialMetrics {
        s_sic,
        s_cica,
        successes,
        p_s,
        p_md: 1.0 - p_s,
        mse: if successes > 0 {
            err_sum / successes as f64
        } else {
            f64::NAN
        },
        throughput: throughput(successes as f64, cfg.n_pd, cfg.code_rate, cfg.overhead()),
        runtime: t0.elapsed().as_secs_f64(),
    };

    let traditional = traditional_ra(cfg.na, cfg.tau_p * cfg.l, cfg.n_pd, cfg.code_rate, rng);
    let multi = multipreamble_approx(&frames, cfg.tau_p, cfg.n_pd, cfg.code_rate);

    Ok(TrialRecord {
        trial: 0,
        metrics,
        traditional,
        multipreamble_approx: multi,
        accepted: report.accepted.len(),
        column_valid: report.valid,
        false_valid,
        missed_valid,
        n_a_hat,
        n_r_hat,
        n_i: cfg.n_i,
        converged_runs,
        peel: peel_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Gcica,
    Traditional,
    MultipreambleApprox,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Gcica => "gcica",
            Scheme::Traditional => "traditional",
            Scheme::MultipreambleApprox => "multipreamble_approx",
        }
    }

    pub fn parse(name: &str) -> Result<Scheme> {
        match name {
            "gcica" => Ok(Scheme::Gcica),
            "traditional" => Ok(Scheme::Traditional),
            "multipreamble_approx" => Ok(Scheme::MultipreambleApprox),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// One aggregated line of the results table.
#[derive(Debug, Clone, Serialize)]
pub struct SchemeRow {
    pub na: usize,
    pub m: usize,
    pub snr_db: f64,
    pub n_i: usize,
    pub tau_p: usize,
    pub l: usize,
    pub scheme: String,
    pub p_s: f64,
    pub p_md: f64,
    pub mse: f64,
    pub throughput: f64,
    pub s_sic: f64,
    pub s_cica: f64,
    pub trials: usize,
    pub stderr_p_s: f64,
    /// Closed-form ceiling columns; NaN on rows they do not apply to.
    pub p_s_u: f64,
    pub p_md_l: f64,
    pub gamma_u: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn stderr_of(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn aggregate(
    cfg: &SystemConfig,
    scheme: Scheme,
    records: &[TrialRecord],
    bounds: Option<&EvolutionResult>,
) -> SchemeRow {
    let na = cfg.na as f64;
    let (p_s_list, mse_list, thr_list, s_sic_list, s_cica_list): (
        Vec<f64>,
        Vec<f64>,
        Vec<f64>,
        Vec<f64>,
        Vec<f64>,
    ) = match scheme {
        Scheme::Gcica => (
            records.iter().map(|r| r.metrics.p_s).collect(),
            records
                .iter()
                .map(|r| r.metrics.mse)
                .filter(|v| v.is_finite())
                .collect(),
            records.iter().map(|r| r.metrics.throughput).collect(),
            records.iter().map(|r| r.metrics.s_sic as f64).collect(),
            records.iter().map(|r| r.metrics.s_cica as f64).collect(),
        ),
        Scheme::Traditional => (
            records
                .iter()
                .map(|r| r.traditional.successes as f64 / na)
                .collect(),
            Vec::new(),
            records.iter().map(|r| r.traditional.throughput).collect(),
            Vec::new(),
            Vec::new(),
        ),
        Scheme::MultipreambleApprox => (
            records
                .iter()
                .map(|r| r.multipreamble_approx.successes as f64 / na)
                .collect(),
            Vec::new(),
            records
                .iter()
                .map(|r| r.multipreamble_approx.throughput)
                .collect(),
            Vec::new(),
            Vec::new(),
        ),
    };
    let p_s = mean(&p_s_list);
    let overlay = match (scheme, bounds) {
        (Scheme::Gcica, Some(b)) => (b.p_s_u, b.p_md_l, b.gamma_u),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    };
    SchemeRow {
        na: cfg.na,
        m: cfg.m,
        snr_db: cfg.snr_db,
        n_i: cfg.n_i,
        tau_p: cfg.tau_p,
        l: cfg.l,
        scheme: scheme.as_str().to_string(),
        p_s,
        p_md: 1.0 - p_s,
        mse: mean(&mse_list),
        throughput: mean(&thr_list),
        s_sic: mean(&s_sic_list),
        s_cica: mean(&s_cica_list),
        trials: records.len(),
        stderr_p_s: stderr_of(&p_s_list),
        p_s_u: overlay.0,
        p_md_l: overlay.1,
        gamma_u: overlay.2,
    }
}

/// Run `trials` seeded trials of one configuration and aggregate one row
/// per requested scheme. Trial `t` always draws from the stream seeded
/// with `cfg.seed ^ t`, so results do not depend on execution order or
/// worker count, and reruns reproduce the same numbers exactly.
pub fn run_point(
    cfg: &SystemConfig,
    trials: usize,
    schemes: &[Scheme],
    overlay: bool,
) -> Result<(Vec<SchemeRow>, Vec<TrialRecord>)> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ t as u64);
        let mut rec = run_trial(cfg, &mut rng)?;
        rec.trial = t as u64;
        records.push(rec);
    }
    let bounds = if overlay { Some(analyze(cfg)?) } else { None };
    let rows = schemes
        .iter()
        .map(|s| aggregate(cfg, *s, &records, bounds.as_ref()))
        .collect();
    Ok((rows, records))
}

/// Grid of configurations to sweep: any listed axis overrides the base
/// value, the rest stay fixed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub na: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub snr_db: Option<Vec<f64>>,
    pub n_i: Option<Vec<usize>>,
    pub tau_p: Option<Vec<usize>>,
    pub l: Option<Vec<usize>>,
    pub trials: usize,
    #[serde(default)]
    pub baselines: Vec<String>,
    #[serde(default)]
    pub overlay: bool,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<SweepSpec> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<SweepSpec> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.trials == 0 {
            return Err(Error::Config("grid.trials must be at least 1".into()));
        }
        for (name, len) in [
            ("na", self.grid.na.as_ref().map(Vec::len)),
            ("m", self.grid.m.as_ref().map(Vec::len)),
            ("snr_db", self.grid.snr_db.as_ref().map(Vec::len)),
            ("n_i", self.grid.n_i.as_ref().map(Vec::len)),
            ("tau_p", self.grid.tau_p.as_ref().map(Vec::len)),
            ("l", self.grid.l.as_ref().map(Vec::len)),
        ] {
            if len == Some(0) {
                return Err(Error::Config(format!("grid.{name} is empty")));
            }
        }
        for cfg in self.points() {
            cfg.validate()?;
        }
        let _ = self.schemes()?;
        Ok(())
    }

    /// The schemes each point reports: the proposed scheme first, then
    /// the requested comparison schemes in listed order.
    pub fn schemes(&self) -> Result<Vec<Scheme>> {
        let mut out = vec![Scheme::Gcica];
        for name in &self.grid.baselines {
            let s = Scheme::parse(name)?;
            if s == Scheme::Gcica {
                continue;
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Cartesian product of the grid axes in a fixed nesting order.
    pub fn points(&self) -> Vec<SystemConfig> {
        let one_usize = |axis: &Option<Vec<usize>>, base: usize| -> Vec<usize> {
            axis.clone().unwrap_or_else(|| vec![base])
        };
        let nas = one_usize(&self.grid.na, self.base.na);
        let ms = one_usize(&self.grid.m, self.base.m);
        let snrs = self
            .grid
            .snr_db
            .clone()
            .unwrap_or_else(|| vec![self.base.snr_db]);
        let nis = one_usize(&self.grid.n_i, self.base.n_i);
        let taus = one_usize(&self.grid.tau_p, self.base.tau_p);
        let ls = one_usize(&self.grid.l, self.base.l);
        let mut out = Vec::new();
        for &na in &nas {
            for &m in &ms {
                for &snr_db in &snrs {
                    for &n_i in &nis {
                        for &tau_p in &taus {
                            for &l in &ls {
                                let mut cfg = self.base.clone();
                                cfg.na = na;
                                cfg.m = m;
                                cfg.snr_db = snr_db;
                                cfg.n_i = n_i;
                                cfg.tau_p = tau_p;
                                cfg.l = l;
                                out.push(cfg);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Float formatting contract for the results table: 17 significant
/// digits, enough to reproduce every double exactly.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub const RESULTS_HEADER: &str =
    "na,m,snr_db,n_i,tau_p,l,scheme,p_s,p_md,mse,throughput,s_sic,s_cica,trials,stderr_p_s";

fn results_header(overlay: bool) -> String {
    if overlay {
        format!("{RESULTS_HEADER},p_s_u,p_md_l,gamma_u")
    } else {
        RESULTS_HEADER.to_string()
    }
}

fn csv_line(row: &SchemeRow, overlay: bool) -> String {
    let mut line = format!(
        "{},{},{},{},{},{},{}",
        row.na,
        row.m,
        fmt17(row.snr_db),
        row.n_i,
        row.tau_p,
        row.l,
        row.scheme
    );
    for v in [row.p_s, row.p_md, row.mse, row.throughput, row.s_sic, row.s_cica] {
        line.push(',');
        line.push_str(&fmt17(v));
    }
    line.push(',');
    line.push_str(&row.trials.to_string());
    line.push(',');
    line.push_str(&fmt17(row.stderr_p_s));
    if overlay {
        for v in [row.p_s_u, row.p_md_l, row.gamma_u] {
            line.push(',');
            line.push_str(&fmt17(v));
        }
    }
    line
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: std::io::Write + ?Sized,
    {
        write!(writer, "{value:.16e}")
    }
}

/// JSON with the same 17-significant-digit float contract as the CSV.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(String::from_utf8(buf).expect("serializer emits utf8"))
}

/// Version tag recorded in every summary: the crate version plus the
/// current commit when a git checkout is available.
pub fn version_string() -> String {
    let described = std::process::Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("v{}-g{}", env!("CARGO_PKG_VERSION"), d),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

fn output_notes() -> serde_json::Value {
    serde_json::json!({
        "mse_population": "successful UEs only",
        "multipreamble_approx": "optimistic uniqueness proxy; treat its curve as an upper bound",
    })
}

/// Monte Carlo at a single configuration: writes `results.csv`,
/// `trials.jsonl` and `summary.json` into `out_dir`.
pub fn run_simulate(cfg: &SystemConfig, trials: usize, out_dir: &Path) -> Result<Vec<SchemeRow>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut csv = fs::File::create(out_dir.join("results.csv"))?;
    let mut jsonl = fs::File::create(out_dir.join("trials.jsonl"))?;

    let schemes = [Scheme::Gcica, Scheme::Traditional, Scheme::MultipreambleApprox];
    let (rows, records) = run_point(cfg, trials, &schemes, false)?;
    writeln!(csv, "{}", results_header(false))?;
    for row in &rows {
        writeln!(csv, "{}", csv_line(row, false))?;
    }
    for rec in &records {
        writeln!(jsonl, "{}", to_json_17(rec)?)?;
    }

    let summary = serde_json::json!({
        "version": version_string(),
        "config": cfg,
        "trials": trials,
        "schemes": schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
        "notes": output_notes(),
    });
    fs::write(out_dir.join("summary.json"), to_json_17(&summary)? + "\n")?;
    Ok(rows)
}

/// Sweep a grid of configurations: writes `results.csv` (one row per
/// point and scheme) and `summary.json` into `out_dir`. Output files are
/// created before any computation so an unwritable path fails fast.
pub fn run_sweep(spec: &SweepSpec, out_dir: &Path) -> Result<Vec<SchemeRow>> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut csv = fs::File::create(out_dir.join("results.csv"))?;
    let schemes = spec.schemes()?;
    let overlay = spec.grid.overlay;
    writeln!(csv, "{}", results_header(overlay))?;
    let mut all_rows = Vec::new();
    for cfg in spec.points() {
        let (rows, _) = run_point(&cfg, spec.grid.trials, &schemes, overlay)?;
        for row in &rows {
            writeln!(csv, "{}", csv_line(row, overlay))?;
        }
        all_rows.extend(rows);
    }
    let summary = serde_json::json!({
        "version": version_string(),
        "spec": spec,
        "points": spec.points().len(),
        "rows": all_rows.len(),
        "notes": output_notes(),
    });
    fs::write(out_dir.join("summary.json"), to_json_17(&summary)? + "\n")?;
    Ok(all_rows)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; the sign is what trend assertions consume.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..rx.len() {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if dx == 0.0 || dy == 0.0 {
        0.0
    } else {
        num / (dx * dy).sqrt()
    }
}
