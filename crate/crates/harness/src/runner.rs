//! Task dispatch, CSV output and the run log.

use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use tracekit::analytic::{self, ArcSpec, WeakBoundReport};
use tracekit::hardpairs;
use tracekit::meanstats::{self, GapMode, IdentityRow, MeanProfile};
use tracekit::reconstruct::{self, IndexRule, UnbeatenReconstructor};
use tracekit::seed::{self, TRIAL_DOMAIN};
use tracekit::{tracefile, BitString, ChannelSpec, Error, Stage, TraceSet};

use crate::config::{ExperimentConfig, ReconstructMode, Task};
use crate::error::{io, HarnessError, Result};
use crate::sweep;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RUN_LOG: &str = "runs.log";

pub const DISTINGUISH_HEADER: &str = "trial,j_star,sample_mean,wrong";
pub const RECONSTRUCT_HEADER: &str = "trial,x,estimate,success,flagged";
pub const HARDPAIR_GAPS_HEADER: &str = "j,b_j,contour_b_j,baseline_b_j";
pub const HARDPAIR_TV_HEADER: &str = "T,max_b,bound,exact_tv,ok";

/// Identity residual tolerance for exact checks.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Number of evaluation points for identity checks.
pub const IDENTITY_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub value: f64,
}

impl Outcome {
    pub fn new(label: impl Into<String>, value: f64) -> Self {
        Outcome { label: label.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// SHA-256 of the serialised config, with `out` blanked.
    pub config_hash: String,
    pub task: Task,
    pub seed: u64,
    pub outcomes: Vec<Outcome>,
    pub summary: String,
    pub elapsed_secs: f64,
    pub version: &'static str,
    /// Set when a check failed or a reconstruction was ambiguous.
    pub diagnostic: bool,
    pub outputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn log_line(&self) -> String {
        let outcomes: Vec<String> = self.outcomes.iter().map(|o| format!("{}={:e}", o.label, o.value)).collect();
        format!(
            "config={} task={} seed={} version={} elapsed={:.3} diagnostic={} summary={:?} outcomes={}\n",
            self.config_hash,
            self.task,
            self.seed,
            self.version,
            self.elapsed_secs,
            self.diagnostic,
            self.summary,
            outcomes.join(";")
        )
    }

    /// Outcome values, the part of a record that is reproducible.
    pub fn outcome_values(&self) -> Vec<(String, u64)> {
        self.outcomes.iter().map(|o| (o.label.clone(), o.value.to_bits())).collect()
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.out = PathBuf::new();
    let digest = Sha256::digest(c.to_text().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

static LOG_LOCK: Mutex<()> = Mutex::new(());

/// Appends one line to `path` with a single write on an append-mode handle.
pub fn append_record(path: &Path, record: &RunRecord) -> Result<()> {
    let _guard = LOG_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io(path))?;
    f.write_all(record.log_line().as_bytes()).map_err(io(path))
}

pub(crate) fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    let mut body = String::with_capacity(header.len() + 1 + rows.iter().map(|r| r.len() + 1).sum::<usize>());
    body.push_str(header);
    body.push('\n');
    for r in rows {
        body.push_str(r);
        body.push('\n');
    }
    fs::write(&path, body).map_err(io(&path))?;
    Ok(path)
}

/// Seeds for trial `trial`: one for drawing the input, one for its traces.
pub fn trial_seeds(master: u64, trial: u64) -> (u64, u64) {
    let base = seed::trial_seed(master, trial);
    (seed::derive_seed(base, TRIAL_DOMAIN, 0), seed::derive_seed(base, TRIAL_DOMAIN, 1))
}

fn random_string(n: usize, s: u64) -> Result<BitString> {
    Ok(BitString::random(n, &mut seed::rng(s))?)
}

/// `cfg.x`, or a string drawn from the master seed.
fn input_x(cfg: &ExperimentConfig) -> Result<BitString> {
    match &cfg.x {
        Some(x) => Ok(x.clone()),
        None => random_string(cfg.n, trial_seeds(cfg.seed, 0).0),
    }
}

/// `(cfg.x, cfg.y)`, filling gaps with random strings so that `x != y`.
fn input_pair(cfg: &ExperimentConfig) -> Result<(BitString, BitString)> {
    let x = input_x(cfg)?;
    if let Some(y) = &cfg.y {
        if *y == x {
            return Err(HarnessError::usage("y", "must differ from x"));
        }
        return Ok((x, y.clone()));
    }
    if cfg.n == 1 {
        let flipped = BitString::new(vec![1 - x.bits()[0]])?;
        return Ok((x, flipped));
    }
    let mut rng = seed::rng(trial_seeds(cfg.seed, 0).1);
    loop {
        let y = BitString::random(cfg.n, &mut rng)?;
        if y != x {
            return Ok((x, y));
        }
    }
}

pub fn run_task(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = cfg.channel()?;
    let out = TaskOutput::default();
    let out = match cfg.task {
        Task::Simulate => simulate(cfg, &spec, out),
        Task::Means => means(cfg, &spec, out),
        Task::VerifyIdentity => verify_identity(cfg, &spec, out),
        Task::Distinguish => distinguish(cfg, &spec, out),
        Task::Reconstruct => reconstruct_task(cfg, &spec, out),
        Task::Weakbound => weakbound(cfg, out),
        Task::Hardpair => hardpair(cfg, out),
        Task::Sweep => sweep::sweep_task(cfg, out),
    }?;
    let record = RunRecord {
        config_hash: config_hash(cfg),
        task: cfg.task,
        seed: cfg.seed,
        outcomes: out.outcomes,
        summary: out.summary,
        elapsed_secs: start.elapsed().as_secs_f64(),
        version: VERSION,
        diagnostic: out.diagnostic,
        outputs: out.outputs,
    };
    fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
    append_record(&cfg.out.join(RUN_LOG), &record)?;
    Ok(record)
}

#[derive(Debug, Default)]
pub(crate) struct TaskOutput {
    pub outcomes: Vec<Outcome>,
    pub summary: String,
    pub diagnostic: bool,
    pub outputs: Vec<PathBuf>,
}

fn simulate(cfg: &ExperimentConfig, spec: &ChannelSpec, mut out: TaskOutput) -> Result<TaskOutput> {
    let x = input_x(cfg)?;
    let ts = tracekit::channels::sample_traces(&x, spec, cfg.traces, cfg.seed)?;
    let path = cfg.trace_file.clone().unwrap_or_else(|| cfg.out.join("traces.txt"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io(dir))?;
    }
    let file = fs::File::create(&path).map_err(io(&path))?;
    tracefile::write_traces(std::io::BufWriter::new(file), &ts).map_err(io(&path))?;
    let total: usize = ts.traces.iter().map(|t| t.len()).sum();
    out.outcomes = ts.traces.iter().enumerate().map(|(t, tr)| Outcome::new(format!("len{t}"), tr.len() as f64)).collect();
    out.summary = format!(
        "{} traces of x = {x}, mean length {:.3}",
        ts.len(),
        total as f64 / ts.len() as f64
    );
    out.outputs.push(path);
    Ok(out)
}

fn means(cfg: &ExperimentConfig, spec: &ChannelSpec, mut out: TaskOutput) -> Result<TaskOutput> {
    let profile: MeanProfile<f64> = if let Some(path) = &cfg.trace_file {
        let file = fs::File::open(path).map_err(io(path))?;
        let ts = tracefile::read_traces(BufReader::new(file))?;
        let horizon = if cfg.horizon > 0 { cfg.horizon } else { ts.max_trace_len().max(ts.source_length) };
        meanstats::empirical_means(&ts, horizon)?
    } else {
        let x = input_x(cfg)?;
        if spec.effective_beta() > 0.0 {
            let horizon = if cfg.horizon > 0 { cfg.horizon } else { meanstats::default_insertion_horizon(cfg.n, spec.beta()) };
            meanstats::sample_means(&x, spec, cfg.traces, cfg.seed, horizon)?
        } else {
            MeanProfile::exact(reconstruct::observed_means(&x, spec)?)
        }
    };
    out.outcomes = profile.means.iter().enumerate().map(|(j, &m)| Outcome::new(format!("m{j}"), m)).collect();
    out.summary = format!("{} {} means", profile.horizon(), profile.kind.name());
    out.outputs.push(write_csv(&cfg.out, "means.csv", MeanProfile::<f64>::CSV_HEADER, &profile.csv_rows())?);
    Ok(out)
}

/// Deterministic evaluation points with `|w| <= radius`.
pub fn sample_points(count: usize, radius: f64, s: u64) -> Vec<Complex64> {
    let mut rng = seed::rng(s);
    (0..count)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
        })
        .collect()
}

fn verify_identity(cfg: &ExperimentConfig, spec: &ChannelSpec, mut out: TaskOutput) -> Result<TaskOutput> {
    let (x, y) = input_pair(cfg)?;
    let (q, lambda, beta) = (spec.effective_q(), spec.effective_lambda(), spec.effective_beta());
    let point_seed = seed::derive_seed(cfg.seed, TRIAL_DOMAIN, u64::MAX);
    let (rows, tol): (Vec<IdentityRow>, f64) = if beta > 0.0 {
        if q > 0.0 || lambda > 0.0 {
            return Err(HarnessError::usage("beta", "the insertion identity is checked with q = lambda = 0"));
        }
        let horizon = if cfg.horizon > 0 { cfg.horizon } else { meanstats::default_insertion_horizon(cfg.n, beta) };
        let ws = sample_points(IDENTITY_POINTS, 1.0, point_seed);
        let a = analytic::diff_seq(&x, &y)?;
        let tail = meanstats::insertion_series_tail_bound(&a, beta, horizon, 1.0)?;
        (meanstats::insertion_identity_check(&x, &y, beta, horizon, &ws)?, 1e-10 + tail)
    } else if lambda > 0.0 {
        if spec.stage_order().iter().position(|&s| s == Stage::Substitution)
            < spec.stage_order().iter().position(|&s| s == Stage::Deletion)
        {
            return Err(HarnessError::usage("order", "the substitution identity assumes deletion before substitution"));
        }
        let mode = if cfg.n <= meanstats::EXACT_MASK_LIMIT {
            GapMode::Exact
        } else {
            GapMode::MonteCarlo { traces: cfg.traces, seed: cfg.seed }
        };
        let ws = sample_points(IDENTITY_POINTS, 1.0, point_seed);
        let mut rows = Vec::with_capacity(ws.len());
        let mut radius: f64 = 0.0;
        for &w in &ws {
            let c = meanstats::substitution_gap_check(&x, &y, q, lambda, w, mode)?;
            radius = radius.max(c.radius);
            rows.push(IdentityRow::new(w, c.lhs, c.rhs));
        }
        (rows, IDENTITY_TOL + radius)
    } else {
        let ws = sample_points(IDENTITY_POINTS, 1.05, point_seed);
        (meanstats::deletion_identity_check(&x, &y, q, &ws)?, IDENTITY_TOL)
    };
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    out.diagnostic = max_residual.is_nan() || max_residual > tol;
    out.outcomes = rows.iter().enumerate().map(|(i, r)| Outcome::new(format!("r{i}"), r.residual)).collect();
    out.summary = format!("max residual {max_residual:.3e} (tolerance {tol:.3e}) for x = {x}, y = {y}");
    let csv: Vec<String> = rows.iter().map(IdentityRow::csv_row).collect();
    out.outputs.push(write_csv(&cfg.out, "identity.csv", IdentityRow::CSV_HEADER, &csv)?);
    Ok(out)
}

/// Sample mean of output bit `j` over `traces` fresh traces of `x`.
pub fn sample_mean_at(x: &BitString, spec: &ChannelSpec, traces: usize, s: u64, j: usize) -> Result<f64> {
    let acc = meanstats::sample_mean_counts(x, spec, traces, s, j + 1)?;
    Ok(acc.ones()[j] as f64 / acc.traces() as f64)
}

fn distinguish(cfg: &ExperimentConfig, spec: &ChannelSpec, mut out: TaskOutput) -> Result<TaskOutput> {
    let (x, y) = input_pair(cfg)?;
    let plan = reconstruct::select_index(&x, &y, spec)?;
    let rows: Vec<(f64, bool)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sample_mean_at(&x, spec, cfg.traces, trial_seeds(cfg.seed, t).1, plan.j_star)?;
            Ok((s, reconstruct::beats(s, &plan)))
        })
        .collect::<Result<_>>()?;
    let wrong = rows.iter().filter(|r| r.1).count();
    let bound = (-(cfg.traces as f64) * plan.eta * plan.eta / 2.0).exp();
    out.outcomes = rows.iter().enumerate().map(|(t, r)| Outcome::new(format!("s{t}"), r.0)).collect();
    out.summary = format!(
        "j* = {}, eta = {:.4}, wrong-beats {wrong}/{} (Chernoff bound {bound:.3e})",
        plan.j_star, plan.eta, cfg.trials
    );
    let csv: Vec<String> =
        rows.iter().enumerate().map(|(t, r)| format!("{t},{},{},{}", plan.j_star, r.0, u8::from(r.1))).collect();
    out.outputs.push(write_csv(&cfg.out, "distinguish.csv", DISTINGUISH_HEADER, &csv)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub x: BitString,
    pub estimate: BitString,
    pub success: bool,
    /// Ambiguous unbeaten outcome, exhausted BMA, or unstable inversion.
    pub flagged: bool,
}

/// Reconstruction engine for one `(mode, n, spec)`.
pub enum Reconstructor {
    Unbeaten(Box<UnbeatenReconstructor>),
    Bma,
    MeanInvert,
}

impl Reconstructor {
    pub fn new(mode: ReconstructMode, n: usize, spec: &ChannelSpec) -> Result<Self> {
        Ok(match mode {
            ReconstructMode::Unbeaten => {
                let cands = reconstruct::all_strings(n)?;
                Reconstructor::Unbeaten(Box::new(UnbeatenReconstructor::new(cands, spec, IndexRule::Argmax)?))
            }
            ReconstructMode::Bma => Reconstructor::Bma,
            ReconstructMode::MeanInvert => {
                if spec.effective_lambda() > 0.0 || spec.effective_beta() > 0.0 {
                    return Err(HarnessError::usage("mode", "meaninvert supports the deletion channel only"));
                }
                Reconstructor::MeanInvert
            }
        })
    }

    /// Reconstructs from an existing trace set; returns the estimate and the flag.
    pub fn run_on(&self, ts: &TraceSet, spec: &ChannelSpec) -> Result<(BitString, bool)> {
        let n = ts.source_length;
        Ok(match self {
            Reconstructor::Unbeaten(r) => {
                let res = r.reconstruct(ts)?;
                (res.estimate, res.ambiguous)
            }
            Reconstructor::Bma => {
                let res = reconstruct::bma_reconstruct(ts, n)?;
                (res.estimate, res.exhausted_at.is_some())
            }
            Reconstructor::MeanInvert => {
                let m = meanstats::empirical_means::<f64>(ts, n)?;
                match meanstats::invert_deletion_means(&m, spec.effective_q()) {
                    Ok(inv) => (inv.string, false),
                    Err(Error::InversionUnstable { .. }) => (BitString::zeros(n)?, true),
                    Err(e) => return Err(e.into()),
                }
            }
        })
    }

    /// Runs one trial on `x` with `traces` traces seeded by `s`.
    pub fn run(&self, x: &BitString, spec: &ChannelSpec, traces: usize, s: u64) -> Result<TrialResult> {
        let n = x.len();
        let (estimate, flagged) = match self {
            Reconstructor::Unbeaten(r) => {
                let m = meanstats::sample_means::<f64>(x, spec, traces, s, n)?;
                let res = r.reconstruct_from_means(&m.means)?;
                (res.estimate, res.ambiguous)
            }
            Reconstructor::Bma => {
                let ts = tracekit::channels::sample_traces(x, spec, traces, s)?;
                let res = reconstruct::bma_reconstruct(&ts, n)?;
                (res.estimate, res.exhausted_at.is_some())
            }
            Reconstructor::MeanInvert => {
                let m = meanstats::sample_means::<f64>(x, spec, traces, s, n)?;
                match meanstats::invert_deletion_means(&m, spec.effective_q()) {
                    Ok(inv) => (inv.string, false),
                    Err(Error::InversionUnstable { .. }) => (BitString::zeros(n)?, true),
                    Err(e) => return Err(e.into()),
                }
            }
        };
        Ok(TrialResult { success: estimate == *x && !flagged, x: x.clone(), estimate, flagged })
    }
}

/// Trial `t` under `master`: input from `fixed` or drawn at random.
pub fn run_trial(
    engine: &Reconstructor,
    fixed: Option<&BitString>,
    n: usize,
    spec: &ChannelSpec,
    traces: usize,
    master: u64,
    t: u64,
) -> Result<TrialResult> {
    let (xs, ts) = trial_seeds(master, t);
    let x = match fixed {
        Some(x) => x.clone(),
        None => random_string(n, xs)?,
    };
    engine.run(&x, spec, traces, ts)
}

fn reconstruct_task(cfg: &ExperimentConfig, spec: &ChannelSpec, mut out: TaskOutput) -> Result<TaskOutput> {
    if let Some(path) = &cfg.trace_file {
        return reconstruct_file(cfg, path, out);
    }
    let engine = Reconstructor::new(cfg.mode, cfg.n, spec)?;
    let results: Vec<TrialResult> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(&engine, cfg.x.as_ref(), cfg.n, spec, cfg.traces, cfg.seed, t))
        .collect::<Result<_>>()?;
    let successes = results.iter().filter(|r| r.success).count();
    let flagged = results.iter().filter(|r| r.flagged).count();
    out.diagnostic = flagged > 0;
    out.outcomes = results.iter().enumerate().map(|(t, r)| Outcome::new(format!("t{t}"), f64::from(u8::from(r.success)))).collect();
    out.summary = format!("{} reconstruction: {successes}/{} exact, {flagged} flagged", cfg.mode, cfg.trials);
    let csv: Vec<String> = results
        .iter()
        .enumerate()
        .map(|(t, r)| format!("{t},{},{},{},{}", r.x, r.estimate, u8::from(r.success), u8::from(r.flagged)))
        .collect();
    out.outputs.push(write_csv(&cfg.out, "reconstruct.csv", RECONSTRUCT_HEADER, &csv)?);
    Ok(out)
}

/// Single reconstruction from a trace file; length and channel come from its header.
fn reconstruct_file(cfg: &ExperimentConfig, path: &Path, mut out: TaskOutput) -> Result<TaskOutput> {
    let file = fs::File::open(path).map_err(io(path))?;
    let ts = tracefile::read_traces(BufReader::new(file))?;
    let engine = Reconstructor::new(cfg.mode, ts.source_length, &ts.spec)?;
    let (estimate, flagged) = engine.run_on(&ts, &ts.spec)?;
    out.diagnostic = flagged;
    out.outcomes = estimate.bits().iter().enumerate().map(|(j, &b)| Outcome::new(format!("b{j}"), f64::from(b))).collect();
    out.summary = format!("{} reconstruction from {} traces: {estimate}{}", cfg.mode, ts.len(), if flagged { " (flagged)" } else { "" });
    let row = format!("0,,{estimate},,{}", u8::from(flagged));
    out.outputs.push(write_csv(&cfg.out, "reconstruct.csv", RECONSTRUCT_HEADER, &[row])?);
    Ok(out)
}

pub(crate) fn arc_grid(cfg: &ExperimentConfig, l: usize) -> Result<ArcSpec> {
    Ok(if cfg.arc_samples == 0 {
        ArcSpec::default_for(cfg.n, l as f64)?
    } else {
        ArcSpec::new(l as f64, cfg.arc_samples)?
    })
}

fn weakbound(cfg: &ExperimentConfig, mut out: TaskOutput) -> Result<TaskOutput> {
    let (x, y) = input_pair(cfg)?;
    let a = analytic::diff_seq(&x, &y)?;
    let reports: Vec<WeakBoundReport> =
        cfg.l_values.iter().map(|&l| Ok(analytic::verify_weak_bound(&a, l, &arc_grid(cfg, l)?)?)).collect::<Result<_>>()?;
    let bad = reports.iter().filter(|r| !r.consistent).count();
    out.diagnostic = bad > 0;
    out.outcomes = reports.iter().map(|r| Outcome::new(format!("L{}", r.l), r.max_on_arc)).collect();
    out.summary = format!("{} arcs checked, {bad} violations", reports.len());
    let csv: Vec<String> = reports.iter().map(WeakBoundReport::csv_row).collect();
    out.outputs.push(write_csv(&cfg.out, "weakbound.csv", WeakBoundReport::CSV_HEADER, &csv)?);
    Ok(out)
}

fn coeff_list(c: &[i8]) -> String {
    c.iter().map(i8::to_string).collect::<Vec<_>>().join(" ")
}

fn hardpair(cfg: &ExperimentConfig, mut out: TaskOutput) -> Result<TaskOutput> {
    let q = cfg.q;
    if cfg.lambda > 0.0 || cfg.beta > 0.0 {
        return Err(HarnessError::usage("lambda/beta", "hard pairs are built for the deletion channel"));
    }
    let poly = hardpairs::search_q(cfg.degree, cfg.search, cfg.budget, cfg.seed)?;
    let pair = hardpairs::build_hard_pair(&poly, cfg.n)?;
    let gap = hardpairs::per_bit_gap(&pair, q)?;
    let contour = hardpairs::per_bit_gap_by_contour(&pair.x, &pair.y, q, cfg.n.max(2))?;
    let (fx, fy) = hardpairs::single_flip_pair(cfg.n)?;
    let base = hardpairs::pair_gap(&fx, &fy, q)?;
    let mx = meanstats::exact_deletion_means::<f64>(&pair.x, q)?;
    let my = meanstats::exact_deletion_means::<f64>(&pair.y, q)?;
    let j = gap.argmax;
    let mut tv_rows = Vec::with_capacity(cfg.tv_t.len());
    let mut violations = 0;
    for &t in &cfg.tv_t {
        let bound = hardpairs::tv_bound_per_bit(gap.max_abs, t);
        let tv = hardpairs::exact_product_bernoulli_tv(mx.means[j], my.means[j], t)?;
        let ok = tv <= bound;
        violations += usize::from(!ok);
        tv_rows.push(format!("{t},{},{bound},{tv},{}", gap.max_abs, u8::from(ok)));
        out.outcomes.push(Outcome::new(format!("tv{t}"), tv));
    }
    let ratio = base.max_abs / gap.max_abs;
    out.outcomes.push(Outcome::new("sup01", poly.sup01));
    out.outcomes.push(Outcome::new("max_b", gap.max_abs));
    out.outcomes.push(Outcome::new("baseline_max_b", base.max_abs));
    out.diagnostic = violations > 0;
    out.summary = format!(
        "Q = [{}], sup on [0,1] = {:.6e}; max|b_j| = {:.6e} at j = {j}; single flip {:.6e}; ratio {ratio:.2}; {violations} TV violations",
        coeff_list(poly.coeffs.coeffs()),
        poly.sup01,
        gap.max_abs,
        base.max_abs
    );
    let gap_rows: Vec<String> = (0..cfg.n)
        .map(|j| format!("{j},{},{},{}", gap.profile.means[j], contour[j], base.profile.means[j]))
        .collect();
    out.outputs.push(write_csv(&cfg.out, "hardpair_gaps.csv", HARDPAIR_GAPS_HEADER, &gap_rows)?);
    out.outputs.push(write_csv(&cfg.out, "hardpair_tv.csv", HARDPAIR_TV_HEADER, &tv_rows)?);
    Ok(out)
}
