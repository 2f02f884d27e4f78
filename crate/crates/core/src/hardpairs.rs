//! Pairs of strings whose per-position output means almost coincide.
//!
//! A polynomial `Q` with {-1, 0, 1} coefficients and small maximum on [0, 1]
//! is split as `Q = phi - psi` with 0/1 coefficient vectors, and both halves
//! are embedded in zero padding. The difference polynomial of the resulting
//! pair is `z^m Q(z)`, which is uniformly small on the image of the unit
//! circle under `w -> p w + q` near 1 and small elsewhere thanks to `z^m`.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::analytic::{horner_signed, SignedSeq};
use crate::channels::BitString;
use crate::error::{param, Error, Result};
use crate::meanstats::{self, MeanProfile};
use crate::seed;

/// Largest degree accepted by the exhaustive search (3^16 coefficient vectors).
pub const MAX_EXHAUSTIVE_DEGREE: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct LittlewoodPoly {
    pub coeffs: SignedSeq,
    /// Grid maximum of `|Q|` on [0, 1], raised by local refinement. The true
    /// maximum exceeds it by at most `n^2 * max_spacing(degree)`.
    pub sup01: f64,
    /// Where `sup01` was attained.
    pub argmax: f64,
}

impl LittlewoodPoly {
    pub fn from_coeffs(coeffs: SignedSeq) -> Self {
        let (sup01, argmax) = sup_on_unit_interval(coeffs.coeffs());
        LittlewoodPoly { coeffs, sup01, argmax }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }
}

#[inline]
fn eval_real(coeffs: &[i8], z: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c as f64)
}

fn grid_intervals(len: usize) -> usize {
    64 * (len.saturating_sub(1)).max(1)
}

/// Chebyshev-spaced grid `z_i = (1 - cos(pi i / N)) / 2`, `N = 64 * degree`.
pub fn unit_interval_grid(len: usize) -> Vec<f64> {
    let n = grid_intervals(len);
    (0..=n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Largest gap between neighbouring grid points.
pub fn max_grid_spacing(len: usize) -> f64 {
    (std::f64::consts::PI / (2.0 * grid_intervals(len) as f64)).sin()
}

fn golden_max(coeffs: &[i8], mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let f = |z: f64| eval_real(coeffs, z).abs();
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..60 {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_PHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_PHI * (hi - lo);
            fb = f(b);
        }
    }
    if fa > fb {
        (fa, a)
    } else {
        (fb, b)
    }
}

/// `(max |Q|, argmax)` on [0, 1]: grid maximum, then golden-section refinement
/// on the neighbouring grid cells, keeping whichever value is larger.
pub fn sup_on_unit_interval(coeffs: &[i8]) -> (f64, f64) {
    let grid = unit_interval_grid(coeffs.len());
    refine(coeffs, &grid, grid_max(coeffs, &grid))
}

fn grid_max(coeffs: &[i8], grid: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &z) in grid.iter().enumerate() {
        let v = eval_real(coeffs, z).abs();
        if v > best.0 {
            best = (v, i);
        }
    }
    best
}

fn refine(coeffs: &[i8], grid: &[f64], (v, i): (f64, usize)) -> (f64, f64) {
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (rv, rz) = golden_max(coeffs, lo, hi);
    if rv > v {
        (rv, rz)
    } else {
        (v, grid[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMode {
    /// Every nonzero vector up to negation, with branch-and-bound pruning.
    Exhaustive,
    /// Simulated annealing with `budget` sup evaluations.
    Anneal,
}

/// Finds a nonzero {-1, 0, 1} vector of length `degree + 1` minimising the
/// maximum of `|Q|` on [0, 1].
///
/// Exhaustive mode returns the minimiser with the lexicographically smallest
/// coefficient vector among ties (so the first nonzero coefficient is -1).
/// `budget` and `seed` only affect annealing.
pub fn search_q(degree: usize, mode: SearchMode, budget: u64, seed: u64) -> Result<LittlewoodPoly> {
    match mode {
        SearchMode::Exhaustive => exhaustive(degree),
        SearchMode::Anneal => anneal(degree, budget, seed),
    }
}

fn decode(mut code: u64, len: usize, out: &mut [i8]) {
    // Most significant digit first, so code order is lexicographic order.
    for k in (0..len).rev() {
        out[k] = (code % 3) as i8 - 1;
        code /= 3;
    }
}

fn exhaustive(degree: usize) -> Result<LittlewoodPoly> {
    if degree > MAX_EXHAUSTIVE_DEGREE {
        return Err(Error::Range(format!(
            "exhaustive search is limited to degree {MAX_EXHAUSTIVE_DEGREE}, got {degree}"
        )));
    }
    let len = degree + 1;
    let grid = unit_interval_grid(len);
    let total = 3u64.pow(len as u32);
    let chunk_count = 3u64.pow((len as u32).min(4));
    let chunk_size = total / chunk_count;
    let best_bits = AtomicU64::new(f64::INFINITY.to_bits());

    let winner = (0..chunk_count)
        .into_par_iter()
        .filter_map(|chunk| {
            let mut coeffs = vec![0i8; len];
            let mut local: Option<(f64, f64, Vec<i8>)> = None;
            let mut killer = 0usize;
            for code in chunk * chunk_size..(chunk + 1) * chunk_size {
                decode(code, len, &mut coeffs);
                // Canonical representative under negation: first nonzero coefficient is -1.
                match coeffs.iter().find(|&&c| c != 0) {
                    Some(-1) => {}
                    _ => continue,
                }
                let bound = f64::from_bits(best_bits.load(Ordering::Relaxed));
                // Values strictly above the incumbent cannot win, ties must survive.
                if eval_real(&coeffs, grid[killer]).abs() > bound {
                    continue;
                }
                let mut gmax = (f64::NEG_INFINITY, 0);
                let mut pruned = false;
                for (i, &z) in grid.iter().enumerate() {
                    let v = eval_real(&coeffs, z).abs();
                    if v > bound {
                        killer = i;
                        pruned = true;
                        break;
                    }
                    if v > gmax.0 {
                        gmax = (v, i);
                    }
                }
                if pruned {
                    continue;
                }
                let (sup, arg) = refine(&coeffs, &grid, gmax);
                if sup > bound {
                    continue;
                }
                best_bits.fetch_min(sup.to_bits(), Ordering::Relaxed);
                let better = match &local {
                    None => true,
                    Some((s, _, c)) => sup < *s || (sup == *s && coeffs < *c),
                };
                if better {
                    local = Some((sup, arg, coeffs.clone()));
                }
            }
            local
        })
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.2 < a.2) {
                b
            } else {
                a
            }
        })
        .expect("at least one nonzero vector exists");

    Ok(LittlewoodPoly { coeffs: SignedSeq::new(winner.2)?, sup01: winner.0, argmax: winner.1 })
}

fn anneal(degree: usize, budget: u64, seed_v: u64) -> Result<LittlewoodPoly> {
    if budget == 0 {
        return param("annealing budget must be positive");
    }
    let len = degree + 1;
    let mut rng = seed::rng(seed::derive_seed(seed_v, 0x616e_6e65_616c, degree as u64));
    let mut cur = vec![0i8; len];
    while cur.iter().all(|&c| c == 0) {
        for c in cur.iter_mut() {
            *c = rng.gen_range(-1..=1);
        }
    }
    let grid = unit_interval_grid(len);
    let score = |c: &[i8]| refine(c, &grid, grid_max(c, &grid));
    let mut cur_val = score(&cur);
    let mut best = (cur_val, cur.clone());
    let (t0, t1) = (1.0f64, 1e-3f64);
    for step in 1..budget {
        let temp = t0 * (t1 / t0).powf(step as f64 / budget as f64);
        let k = rng.gen_range(0..len);
        let old = cur[k];
        let shift = rng.gen_range(1..=2);
        cur[k] = ((old + 1 + shift) % 3) - 1;
        if cur.iter().all(|&c| c == 0) {
            cur[k] = old;
            continue;
        }
        let val = score(&cur);
        let delta = val.0.ln() - cur_val.0.ln();
        if delta <= 0.0 || rng.gen::<f64>() < (-delta / temp).exp() {
            cur_val = val;
            if val.0 < best.0 .0 || (val.0 == best.0 .0 && cur < best.1) {
                best = (val, cur.clone());
            }
        } else {
            cur[k] = old;
        }
    }
    let ((sup01, argmax), coeffs) = best;
    Ok(LittlewoodPoly { coeffs: SignedSeq::new(coeffs)?, sup01, argmax })
}

/// `Q = phi - psi` with `phi_k = [c_k = 1]` and `psi_k = [c_k = -1]`.
pub fn split_q(q: &SignedSeq) -> (BitString, BitString) {
    let phi = q.coeffs().iter().map(|&c| u8::from(c == 1)).collect();
    let psi = q.coeffs().iter().map(|&c| u8::from(c == -1)).collect();
    (
        BitString::new(phi).expect("nonempty 0/1 vector"),
        BitString::new(psi).expect("nonempty 0/1 vector"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardPair {
    pub x: BitString,
    pub y: BitString,
    /// Number of leading zeros before the embedded halves.
    pub m: usize,
    pub q: LittlewoodPoly,
}

impl HardPair {
    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// `x = 0^m phi 0^r`, `y = 0^m psi 0^r` with `m = floor((n - len Q) / 2)`.
pub fn build_hard_pair(q: &LittlewoodPoly, n: usize) -> Result<HardPair> {
    let len = q.coeffs.len();
    if n < len {
        return param(format!("n = {n} is smaller than the {len} coefficients of Q"));
    }
    let m = (n - len) / 2;
    let (phi, psi) = split_q(&q.coeffs);
    let embed = |half: &BitString| {
        let mut bits = vec![0u8; n];
        bits[m..m + len].copy_from_slice(half.bits());
        BitString::new(bits)
    };
    Ok(HardPair { x: embed(&phi)?, y: embed(&psi)?, m, q: q.clone() })
}

/// The pair `x = e_{n/2}`, `y = 0`: a single flipped bit in the middle.
pub fn single_flip_pair(n: usize) -> Result<(BitString, BitString)> {
    let mut bits = vec![0u8; n];
    if n == 0 {
        return param("n must be at least 1");
    }
    bits[n / 2] = 1;
    Ok((BitString::new(bits)?, BitString::zeros(n)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `b_j = E[X~_j] - E[Y~_j]`, `j < n`.
    pub profile: MeanProfile<f64>,
    pub max_abs: f64,
    pub argmax: usize,
}

fn gap_report(profile: MeanProfile<f64>) -> GapReport {
    let (argmax, max_abs) = profile
        .means
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bi, bv) });
    GapReport { profile, max_abs, argmax }
}

/// Per-position mean gaps of a pair under deletion, from exact means.
pub fn pair_gap(x: &BitString, y: &BitString, q: f64) -> Result<GapReport> {
    Ok(gap_report(meanstats::deletion_difference_means(x, y, q)?))
}

pub fn per_bit_gap(pair: &HardPair, q: f64) -> Result<GapReport> {
    pair_gap(&pair.x, &pair.y, q)
}

/// Mean gaps recovered as Fourier coefficients of `B(w) = p A(p w + q)` on
/// the unit circle, by the `points`-point trapezoid rule. Exact up to rounding
/// when `points >= n`.
pub fn per_bit_gap_by_contour(x: &BitString, y: &BitString, q: f64, points: usize) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&q) {
        return param(format!("deletion probability q = {q} outside [0, 1)"));
    }
    if points < 2 {
        return param("quadrature needs at least 2 points");
    }
    let a = crate::analytic::diff_seq(x, y)?;
    let p = 1.0 - q;
    let step = std::f64::consts::TAU / points as f64;
    let values: Vec<Complex<f64>> = (0..points)
        .map(|t| horner_signed(a.coeffs(), Complex::from_polar(p, step * t as f64) + q) * p)
        .collect();
    Ok((0..a.len())
        .map(|j| {
            let s: Complex<f64> = values
                .iter()
                .enumerate()
                .map(|(t, v)| v * Complex::from_polar(1.0, -step * ((j * t) % points) as f64))
                .sum();
            s.re / points as f64
        })
        .collect())
}

/// Coupling bound on the total variation between `T` samples of two
/// Bernoulli laws whose means differ by `b_j`.
pub fn tv_bound_per_bit(b_j: f64, t: u64) -> f64 {
    (t as f64 * b_j.abs()).min(1.0)
}

pub const TV_SUMMATION_LIMIT: u64 = 1_000_000;

fn ln_binom_pmf(t: u64, k: u64, ln_c: f64, p: f64) -> f64 {
    let term = |count: u64, prob: f64| if count == 0 { 0.0 } else { count as f64 * prob.ln() };
    ln_c + term(k, p) + term(t - k, 1.0 - p)
}

/// Exact total variation between `Bernoulli(p1)^T` and `Bernoulli(p2)^T`,
/// computed as the distance between `Binomial(T, p1)` and `Binomial(T, p2)`.
pub fn exact_product_bernoulli_tv(p1: f64, p2: f64, t: u64) -> Result<f64> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return param(format!("probability {p} outside [0, 1]"));
        }
    }
    if t == 0 {
        return param("sample count T must be at least 1");
    }
    if t > TV_SUMMATION_LIMIT {
        return Err(Error::Range(format!("T = {t} exceeds the summation budget {TV_SUMMATION_LIMIT}")));
    }
    if p1 == p2 {
        return Ok(0.0);
    }
    let mut ln_c = 0.0;
    let mut total = 0.0;
    for k in 0..=t {
        if k > 0 {
            ln_c += ((t - k + 1) as f64).ln() - (k as f64).ln();
        }
        let a = ln_binom_pmf(t, k, ln_c, p1).exp();
        let b = ln_binom_pmf(t, k, ln_c, p2).exp();
        total += (a - b).abs();
    }
    Ok((0.5 * total).min(1.0))
}
