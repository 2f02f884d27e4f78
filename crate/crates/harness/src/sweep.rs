//! Parameter sweeps: Cartesian grids, per-cell seeds, trial budgets.

use std::collections::BTreeMap;

use rayon::prelude::*;

use tracekit::hardpairs;
use tracekit::reconstruct;
use tracekit::seed::{self, CELL_DOMAIN};
use tracekit::{ChannelSpec, Stage};

use crate::config::{ExperimentConfig, SweepMetric};
use crate::error::{HarnessError, Result};
use crate::runner::{self, Outcome, Reconstructor, TaskOutput};

pub const SUCCESS_HEADER: &str = "n,q,lambda,beta,T,trials,successes,rate";
pub const T90_HEADER: &str = "n,q,lambda,beta,trials,t90,log10_t90";
pub const ADVANTAGE_HEADER: &str = "n,q,T,trials,advantage,stderr,max_b,bound,exact_tv,dominated";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub q: f64,
    pub lambda: f64,
    pub beta: f64,
    pub traces: usize,
}

impl Cell {
    /// Seed from the master seed and the cell's coordinate values, so a
    /// cell's result does not depend on the rest of the grid.
    pub fn seed(&self, master: u64) -> u64 {
        [self.n as u64, self.q.to_bits(), self.lambda.to_bits(), self.beta.to_bits(), self.traces as u64]
            .into_iter()
            .fold(master, |s, c| seed::derive_seed(s, CELL_DOMAIN, c))
    }

    pub fn spec(&self, order: &[Stage]) -> Result<ChannelSpec> {
        ChannelSpec::new(self.q, self.lambda, self.beta, order.to_vec())
            .map_err(|e| HarnessError::usage("sweep", e.to_string()))
    }
}

fn or_base<T: Copy>(list: &[T], base: T) -> Vec<T> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

/// Cells in row-major order over `(n, q, lambda, beta, T)`. Empty sweep lists
/// fall back to the single base value.
pub fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &n in &or_base(&cfg.sweep_n, cfg.n) {
        for &q in &or_base(&cfg.sweep_q, cfg.q) {
            for &lambda in &or_base(&cfg.sweep_lambda, cfg.lambda) {
                for &beta in &or_base(&cfg.sweep_beta, cfg.beta) {
                    for &traces in &or_base(&cfg.sweep_t, cfg.traces) {
                        cells.push(Cell { n, q, lambda, beta, traces });
                    }
                }
            }
        }
    }
    cells
}

/// Trace counts tried by the T90 search: `round(10 * 2^(k/2))` up to `cap`.
pub fn t_grid(cap: usize) -> Vec<usize> {
    let mut v: Vec<usize> = Vec::new();
    for k in 0.. {
        let t = (10.0 * 2f64.powf(k as f64 / 2.0)).round() as usize;
        if t > cap {
            break;
        }
        if v.last() != Some(&t) {
            v.push(t);
        }
    }
    v
}

/// Upper bound on the number of trials a sweep will run.
pub fn planned_trials(cfg: &ExperimentConfig) -> u64 {
    let cells = grid(cfg).len() as u64;
    let per_cell = cfg.trials as u64
        * match cfg.metric {
            SweepMetric::Success => 1,
            SweepMetric::Advantage => 2,
            SweepMetric::T90 => {
                let len = t_grid(cfg.traces).len().max(1) as u64;
                1 + (u64::BITS - len.leading_zeros()) as u64
            }
        };
    cells.saturating_mul(per_cell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub seed: u64,
    pub trials: usize,
    /// Success count, T90 (NaN when not reached) or advantage.
    pub value: f64,
    pub successes: usize,
    pub stderr: f64,
    pub max_b: f64,
    pub bound: f64,
    pub exact_tv: f64,
}

impl CellResult {
    pub fn csv_row(&self, metric: SweepMetric) -> String {
        let c = &self.cell;
        match metric {
            SweepMetric::Success => format!(
                "{},{},{},{},{},{},{},{}",
                c.n, c.q, c.lambda, c.beta, c.traces, self.trials, self.successes, self.value
            ),
            SweepMetric::T90 => {
                let (t, log) = if self.value.is_nan() {
                    (String::new(), String::new())
                } else {
                    (self.value.to_string(), self.value.log10().to_string())
                };
                format!("{},{},{},{},{},{t},{log}", c.n, c.q, c.lambda, c.beta, self.trials)
            }
            SweepMetric::Advantage => format!(
                "{},{},{},{},{},{},{},{},{},{}",
                c.n,
                c.q,
                c.traces,
                self.trials,
                self.value,
                self.stderr,
                self.max_b,
                self.bound,
                self.exact_tv,
                u8::from(self.dominated())
            ),
        }
    }

    /// Empirical advantage within three standard errors of the coupling bound.
    pub fn dominated(&self) -> bool {
        self.value <= self.bound + 3.0 * self.stderr
    }

    fn blank(cell: Cell, seed: u64, trials: usize) -> Self {
        CellResult { cell, seed, trials, value: 0.0, successes: 0, stderr: 0.0, max_b: 0.0, bound: 0.0, exact_tv: 0.0 }
    }
}

pub fn header(metric: SweepMetric) -> &'static str {
    match metric {
        SweepMetric::Success => SUCCESS_HEADER,
        SweepMetric::T90 => T90_HEADER,
        SweepMetric::Advantage => ADVANTAGE_HEADER,
    }
}

/// Runs every cell of the grid. Refuses before doing any work when the
/// planned trial count exceeds `max_trials`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let needed = planned_trials(cfg);
    if needed > cfg.max_trials {
        return Err(HarnessError::Budget { needed, budget: cfg.max_trials });
    }
    let cells = grid(cfg);
    if cells.is_empty() {
        return Err(HarnessError::usage("sweep", "grid is empty"));
    }
    let hard_q = match cfg.metric {
        SweepMetric::Advantage => Some(hardpairs::search_q(cfg.degree, cfg.search, cfg.budget, cfg.seed)?),
        _ => None,
    };
    cells
        .par_iter()
        .map(|&cell| {
            let spec = cell.spec(&cfg.order)?;
            let s = cell.seed(cfg.seed);
            match cfg.metric {
                SweepMetric::Success => success_cell(cfg, cell, &spec, s),
                SweepMetric::T90 => t90_cell(cfg, cell, &spec, s),
                SweepMetric::Advantage => advantage_cell(cfg, cell, &spec, s, hard_q.as_ref().expect("searched above")),
            }
        })
        .collect()
}

fn success_cell(cfg: &ExperimentConfig, cell: Cell, spec: &ChannelSpec, s: u64) -> Result<CellResult> {
    let engine = Reconstructor::new(cfg.mode, cell.n, spec)?;
    let fixed = cfg.x.as_ref().filter(|x| x.len() == cell.n);
    let mut successes = 0;
    for t in 0..cfg.trials as u64 {
        successes += usize::from(runner::run_trial(&engine, fixed, cell.n, spec, cell.traces, s, t)?.success);
    }
    let mut r = CellResult::blank(cell, s, cfg.trials);
    r.successes = successes;
    r.value = successes as f64 / cfg.trials as f64;
    Ok(r)
}

/// Smallest grid `T` whose success rate reaches `target_success`, by bisection.
/// Every evaluation reuses the same inputs and trace seeds, and the traces for
/// a smaller `T` are a prefix of those for a larger one.
fn t90_cell(cfg: &ExperimentConfig, cell: Cell, spec: &ChannelSpec, s: u64) -> Result<CellResult> {
    let engine = Reconstructor::new(cfg.mode, cell.n, spec)?;
    let fixed = cfg.x.as_ref().filter(|x| x.len() == cell.n);
    let grid = t_grid(cfg.traces);
    let mut cache: BTreeMap<usize, usize> = BTreeMap::new();
    let mut rate_ok = |k: usize| -> Result<bool> {
        if let Some(&c) = cache.get(&k) {
            return Ok(c as f64 >= cfg.target_success * cfg.trials as f64);
        }
        let mut c = 0;
        for t in 0..cfg.trials as u64 {
            c += usize::from(runner::run_trial(&engine, fixed, cell.n, spec, grid[k], s, t)?.success);
        }
        cache.insert(k, c);
        Ok(c as f64 >= cfg.target_success * cfg.trials as f64)
    };
    let mut r = CellResult::blank(cell, s, cfg.trials);
    r.value = f64::NAN;
    if grid.is_empty() || !rate_ok(grid.len() - 1)? {
        return Ok(r);
    }
    let (mut lo, mut hi) = (0usize, grid.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if rate_ok(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    r.value = grid[hi] as f64;
    r.successes = cache.get(&hi).copied().unwrap_or(0);
    Ok(r)
}

fn advantage_cell(
    cfg: &ExperimentConfig,
    cell: Cell,
    spec: &ChannelSpec,
    s: u64,
    poly: &hardpairs::LittlewoodPoly,
) -> Result<CellResult> {
    let pair = hardpairs::build_hard_pair(poly, cell.n)?;
    let plan = reconstruct::select_index(&pair.x, &pair.y, spec)?;
    let (mut hit_x, mut hit_y) = (0usize, 0usize);
    for t in 0..cfg.trials as u64 {
        let (sx, sy) = runner::trial_seeds(s, t);
        let mx = runner::sample_mean_at(&pair.x, spec, cell.traces, sx, plan.j_star)?;
        let my = runner::sample_mean_at(&pair.y, spec, cell.traces, sy, plan.j_star)?;
        hit_x += usize::from(!reconstruct::beats(mx, &plan));
        hit_y += usize::from(!reconstruct::beats(my, &plan));
    }
    let trials = cfg.trials as f64;
    let (px, py) = (hit_x as f64 / trials, hit_y as f64 / trials);
    let mut r = CellResult::blank(cell, s, cfg.trials);
    r.value = px - py;
    r.stderr = (px * (1.0 - px) / trials + py * (1.0 - py) / trials).sqrt().max(1.0 / trials);
    r.max_b = plan.eta;
    r.bound = hardpairs::tv_bound_per_bit(plan.eta, cell.traces as u64);
    r.exact_tv = hardpairs::exact_product_bernoulli_tv(plan.mean_x, plan.mean_y, cell.traces as u64)?;
    Ok(r)
}

pub(crate) fn sweep_task(cfg: &ExperimentConfig, mut out: TaskOutput) -> Result<TaskOutput> {
    let results = sweep(cfg)?;
    let rows: Vec<String> = results.iter().map(|r| r.csv_row(cfg.metric)).collect();
    out.outcomes = results.iter().enumerate().map(|(i, r)| Outcome::new(format!("cell{i}"), r.value)).collect();
    if cfg.metric == SweepMetric::Advantage {
        out.diagnostic = results.iter().any(|r| !r.dominated());
    }
    out.summary = format!("{} cells, metric {}", results.len(), cfg.metric);
    out.outputs.push(runner::write_csv(&cfg.out, "sweep.csv", header(cfg.metric), &rows)?);
    Ok(out)
}
