//! Per-position means of zero-padded channel outputs.
//!
//! For the deletion channel the padded output mean at position `j` is
//!
//! ```text
//! E[out_j] = p * sum_{k >= j} a_k C(k, j) p^j q^(k-j)
//! ```
//!
//! whose generating series is `p * A(p w + q)`. For the insertion channel the
//! difference of two coupled outputs has mean
//!
//! ```text
//! E[D_j] = sum_{k <= min(j, n-1)} C(j, k) alpha^(k+1) beta^(j-k) a_k
//! ```
//!
//! with generating series `sum_k a_k (alpha w / (1 - beta w))^(k+1)` (shifted
//! by one power of `w`).

use num_complex::Complex;
use rayon::prelude::*;

use crate::analytic::{check_finite, horner, horner_signed, SignedSeq};
use crate::binom;
use crate::channels::{BitString, ChannelScratch, ChannelSpec, TraceSet};
use crate::error::{param, Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanKind {
    Exact,
    Empirical,
}

impl MeanKind {
    pub fn name(self) -> &'static str {
        match self {
            MeanKind::Exact => "exact",
            MeanKind::Empirical => "empirical",
        }
    }
}

/// Means indexed by output position; the horizon is `means.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanProfile<T> {
    pub means: Vec<T>,
    pub stderr: Option<Vec<T>>,
    pub kind: MeanKind,
}

impl<T: Scalar> MeanProfile<T> {
    pub fn exact(means: Vec<T>) -> Self {
        MeanProfile { means, stderr: None, kind: MeanKind::Exact }
    }

    pub fn horizon(&self) -> usize {
        self.means.len()
    }

    pub fn max_abs(&self) -> T {
        self.means.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `self - other`, padding the shorter profile with zeros. Standard errors
    /// combine as for independent estimates.
    pub fn difference(&self, other: &MeanProfile<T>) -> MeanProfile<T> {
        let h = self.horizon().max(other.horizon());
        let at = |v: &[T], j: usize| v.get(j).copied().unwrap_or_else(T::zero);
        let means = (0..h).map(|j| at(&self.means, j) - at(&other.means, j)).collect();
        let stderr = match (&self.stderr, &other.stderr) {
            (None, None) => None,
            (a, b) => {
                let se = |s: &Option<Vec<T>>, j| s.as_ref().map_or(T::zero(), |v| at(v, j));
                Some((0..h).map(|j| (se(a, j).powi(2) + se(b, j).powi(2)).sqrt()).collect())
            }
        };
        let kind = if self.kind == MeanKind::Exact && other.kind == MeanKind::Exact {
            MeanKind::Exact
        } else {
            MeanKind::Empirical
        };
        MeanProfile { means, stderr, kind }
    }

    pub const CSV_HEADER: &'static str = "j,mean,stderr,kind";

    /// Rows of `means.csv`; the stderr column is empty for exact profiles.
    pub fn csv_rows(&self) -> Vec<String> {
        self.means
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let se = self
                    .stderr
                    .as_ref()
                    .map(|s| format!("{:e}", s[j].to_f64_lossy()))
                    .unwrap_or_default();
                format!("{j},{:e},{se},{}", m.to_f64_lossy(), self.kind.name())
            })
            .collect()
    }
}

fn powers<T: Scalar>(base: f64, count: usize) -> Vec<T> {
    let b = T::of(base);
    let mut v = Vec::with_capacity(count);
    let mut cur = T::one();
    for _ in 0..count {
        v.push(cur);
        cur *= b;
    }
    v
}

/// Exact deletion-channel means for real input coefficients (bits or differences).
pub fn deletion_means_of<T: Scalar>(a: &[T], q: f64) -> Result<MeanProfile<T>> {
    if !(0.0..1.0).contains(&q) {
        return param(format!("deletion probability q = {q} outside [0, 1)"));
    }
    let n = a.len();
    if n > binom::MAX_ROW + 1 {
        return Err(Error::Range(format!("input length {n} exceeds {}", binom::MAX_ROW + 1)));
    }
    let p_pow = powers::<T>(1.0 - q, n + 1);
    let q_pow = powers::<T>(q, n);
    let p = T::of(1.0 - q);
    let mut means = vec![T::zero(); n];
    for (k, &ak) in a.iter().enumerate() {
        if ak == T::zero() {
            continue;
        }
        let row = binom::row(k)?;
        for (j, m) in means.iter_mut().enumerate().take(k + 1) {
            *m += ak * T::of(row[j]) * p_pow[j] * q_pow[k - j];
        }
    }
    for m in &mut means {
        *m *= p;
    }
    Ok(MeanProfile::exact(means))
}

pub fn exact_deletion_means<T: Scalar>(x: &BitString, q: f64) -> Result<MeanProfile<T>> {
    let a: Vec<T> = x.bits().iter().map(|&b| T::of(b as f64)).collect();
    deletion_means_of(&a, q)
}

/// Exact mean profile of `X~ - Y~` under deletion.
pub fn deletion_difference_means<T: Scalar>(x: &BitString, y: &BitString, q: f64) -> Result<MeanProfile<T>> {
    let a = crate::analytic::diff_seq(x, y)?;
    deletion_means_of(&a.to_scalars::<T>(), q)
}

/// `P(L > j)` for `L ~ Binomial(n, p)`, `j = 0..n`.
pub fn retained_length_survival<T: Scalar>(n: usize, q: f64) -> Result<Vec<T>> {
    let row = binom::row(n)?;
    let p_pow = powers::<T>(1.0 - q, n + 1);
    let q_pow = powers::<T>(q, n + 1);
    let pmf: Vec<T> = (0..=n).map(|l| T::of(row[l]) * p_pow[l] * q_pow[n - l]).collect();
    let mut surv = vec![T::zero(); n];
    let mut acc = T::zero();
    for j in (0..n).rev() {
        acc += pmf[j + 1];
        surv[j] = acc;
    }
    Ok(surv)
}

/// Exact single-string means of the deletion-then-substitution output. Only
/// stored bits flip, so `E[out_j] = (1 - 2 lambda) E[del_j] + lambda P(len > j)`.
pub fn exact_deletion_substitution_means<T: Scalar>(x: &BitString, q: f64, lambda: f64) -> Result<MeanProfile<T>> {
    if !(0.0..0.5).contains(&lambda) {
        return param(format!("flip probability lambda = {lambda} outside [0, 1/2)"));
    }
    let mut prof = exact_deletion_means::<T>(x, q)?;
    if lambda > 0.0 {
        let surv = retained_length_survival::<T>(x.len(), q)?;
        let (l, f) = (T::of(lambda), T::of(1.0 - 2.0 * lambda));
        for (m, s) in prof.means.iter_mut().zip(surv) {
            *m = f * *m + l * s;
        }
    }
    Ok(prof)
}

/// `ceil((n+1)/alpha) + ceil(10 sqrt((n+1) beta / alpha^2))`.
pub fn default_insertion_horizon(n: usize, beta: f64) -> usize {
    let alpha = 1.0 - beta;
    let m = (n + 1) as f64;
    (m / alpha).ceil() as usize + (10.0 * (m * beta / (alpha * alpha)).sqrt()).ceil() as usize
}

/// Difference-of-means profile of two coupled insertion channels.
#[derive(Debug, Clone, PartialEq)]
pub struct InsertionGap<T> {
    pub profile: MeanProfile<T>,
    /// Upper bound on `sum_{j >= horizon} |E[D_j]|`, the mass cut off by truncation.
    pub tail_bound: f64,
}

pub fn exact_insertion_gap_means<T: Scalar>(
    x: &BitString,
    y: &BitString,
    beta: f64,
    horizon: usize,
) -> Result<InsertionGap<T>> {
    if !(0.0..1.0).contains(&beta) {
        return param(format!("insertion parameter beta = {beta} outside [0, 1)"));
    }
    let a = crate::analytic::diff_seq(x, y)?;
    let n = a.len();
    if horizon < n {
        return param(format!("horizon {horizon} is shorter than the input length {n}"));
    }
    if horizon > binom::MAX_ROW + 1 {
        return Err(Error::Range(format!("horizon {horizon} exceeds {}", binom::MAX_ROW + 1)));
    }
    let alpha_pow = powers::<T>(1.0 - beta, n + 1);
    let beta_pow = powers::<T>(beta, horizon);
    let mut means = vec![T::zero(); horizon];
    for (j, m) in means.iter_mut().enumerate() {
        let row = binom::row(j)?;
        let mut acc = T::zero();
        for k in 0..=j.min(n - 1) {
            match a.coeffs()[k] {
                0 => {}
                c => acc += T::of(c as f64) * T::of(row[k]) * alpha_pow[k + 1] * beta_pow[j - k],
            }
        }
        *m = acc;
    }
    let tail_bound = insertion_series_tail_bound(&a, beta, horizon, 1.0)?;
    Ok(InsertionGap { profile: MeanProfile::exact(means), tail_bound })
}

/// Rigorous upper bound on `sum_{j >= horizon} |E[D_j]| r^(j+1)` for `beta r < 1`.
///
/// Each nonzero `a_k` contributes `(alpha r)^(k+1) sum_{j >= max(k, horizon)} C(j,k) s^(j-k)`
/// with `s = beta r`; the inner sum is accumulated until the term ratio drops
/// below one and the remainder is closed with a geometric bound.
pub fn insertion_series_tail_bound(a: &SignedSeq, beta: f64, horizon: usize, r: f64) -> Result<f64> {
    let alpha = 1.0 - beta;
    let s = beta * r;
    if s >= 1.0 {
        return Err(Error::Range(format!("series diverges: beta |w| = {s} >= 1")));
    }
    if s == 0.0 {
        // Only j = k terms survive; they lie below the horizon whenever horizon >= n.
        return Ok(a
            .coeffs()
            .iter()
            .enumerate()
            .filter(|&(k, &c)| c != 0 && k >= horizon)
            .map(|(k, _)| (alpha * r).powi(k as i32 + 1))
            .sum());
    }
    let mut total = 0.0;
    for (k, &c) in a.coeffs().iter().enumerate() {
        if c == 0 {
            continue;
        }
        let start = horizon.max(k);
        // t_j = C(j, k) s^(j - k), evaluated in log space.
        let ln_choose = |j: usize| -> f64 { ln_binomial(j, k) };
        let mut j = start;
        let mut term = (ln_choose(j) + (j - k) as f64 * s.ln()).exp();
        let mut sum = 0.0;
        loop {
            sum += term;
            let ratio = (j + 1) as f64 / (j + 1 - k) as f64 * s;
            if ratio < 1.0 && term <= sum * 1e-17 {
                // ratios decrease in j, so the remainder is below term * ratio / (1 - ratio)
                sum += term * ratio / (1.0 - ratio);
                break;
            }
            term *= ratio;
            j += 1;
        }
        total += (alpha * r).powi(k as i32 + 1) * sum;
    }
    // Absorb the floating point error of the accumulation.
    Ok(total * (1.0 + 1e-12))
}

fn ln_binomial(j: usize, k: usize) -> f64 {
    // Exact enough for bounding purposes: sum of logs.
    let k = k.min(j - k);
    (0..k).map(|i| ((j - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Per-position one-counts of zero-padded traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeanAccumulator {
    ones: Vec<u64>,
    traces: u64,
}

impl MeanAccumulator {
    pub fn new(horizon: usize) -> Self {
        MeanAccumulator { ones: vec![0; horizon], traces: 0 }
    }

    #[inline]
    pub fn add(&mut self, bits: &[u8]) {
        for (c, &b) in self.ones.iter_mut().zip(bits) {
            *c += b as u64;
        }
        self.traces += 1;
    }

    pub fn merge(mut self, other: MeanAccumulator) -> Self {
        for (a, b) in self.ones.iter_mut().zip(other.ones) {
            *a += b;
        }
        self.traces += other.traces;
        self
    }

    pub fn traces(&self) -> u64 {
        self.traces
    }

    pub fn ones(&self) -> &[u64] {
        &self.ones
    }

    /// Empirical means with `stderr_j = sqrt(m_j (1 - m_j) / T)`.
    pub fn profile<T: Scalar>(&self) -> Result<MeanProfile<T>> {
        if self.traces == 0 {
            return param("no traces accumulated");
        }
        let t = T::of(self.traces as f64);
        let means: Vec<T> = self.ones.iter().map(|&c| T::of(c as f64) / t).collect();
        let stderr = means.iter().map(|&m| (m * (T::one() - m) / t).sqrt()).collect();
        Ok(MeanProfile { means, stderr: Some(stderr), kind: MeanKind::Empirical })
    }
}

pub fn empirical_means<T: Scalar>(ts: &TraceSet, horizon: usize) -> Result<MeanProfile<T>> {
    if horizon == 0 {
        return param("horizon must be at least 1");
    }
    if ts.is_empty() {
        return param("trace set is empty");
    }
    let mut acc = MeanAccumulator::new(horizon);
    for t in &ts.traces {
        acc.add(t.bits());
    }
    acc.profile()
}

/// Streaming equivalent of `empirical_means(sample_traces(x, spec, count, seed), horizon)`
/// that never materialises the traces.
pub fn sample_mean_counts(
    x: &BitString,
    spec: &ChannelSpec,
    count: usize,
    master_seed: u64,
    horizon: usize,
) -> Result<MeanAccumulator> {
    if count == 0 {
        return param("trace count T must be at least 1");
    }
    if horizon == 0 {
        return param("horizon must be at least 1");
    }
    // Integer counts make the reduction independent of the schedule.
    (0..count as u64)
        .into_par_iter()
        .fold(
            || Ok((MeanAccumulator::new(horizon), ChannelScratch::default())),
            |state: Result<(MeanAccumulator, ChannelScratch)>, t| {
                let (mut acc, mut scratch) = state?;
                let bits = scratch.run(x.bits(), spec, seed::trace_seed(master_seed, t))?;
                acc.add(bits);
                Ok((acc, scratch))
            },
        )
        .map(|r| r.map(|(acc, _)| acc))
        .try_reduce(|| MeanAccumulator::new(horizon), |a, b| Ok(a.merge(b)))
}

pub fn sample_means<T: Scalar>(
    x: &BitString,
    spec: &ChannelSpec,
    count: usize,
    master_seed: u64,
    horizon: usize,
) -> Result<MeanProfile<T>> {
    sample_mean_counts(x, spec, count, master_seed, horizon)?.profile()
}

fn series_guard<T: Scalar>(horizon: usize, w: Complex<T>) -> Result<()> {
    let limit = 600f64.min(0.85 * T::max_value().to_f64_lossy().ln());
    let r = w.norm().to_f64_lossy();
    if r > 1.0 && horizon as f64 * r.ln() > limit {
        return Err(Error::Range(format!(
            "|w|^horizon = {r}^{horizon} exceeds the floating point guard"
        )));
    }
    Ok(())
}

/// `sum_j means[j] w^j`.
pub fn gen_series_at_w<T: Scalar>(m: &MeanProfile<T>, w: Complex<T>) -> Result<Complex<T>> {
    check_finite(w)?;
    series_guard(m.horizon(), w)?;
    Ok(horner(&m.means, w))
}

/// One row of an identity-check report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityRow {
    pub w: Complex<f64>,
    pub lhs: Complex<f64>,
    pub rhs: Complex<f64>,
    pub residual: f64,
}

impl IdentityRow {
    pub const CSV_HEADER: &'static str = "w_re,w_im,lhs_re,lhs_im,rhs_re,rhs_im,residual";

    pub fn new(w: Complex<f64>, lhs: Complex<f64>, rhs: Complex<f64>) -> Self {
        IdentityRow { w, lhs, rhs, residual: (lhs - rhs).norm() }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.w.re, self.w.im, self.lhs.re, self.lhs.im, self.rhs.re, self.rhs.im, self.residual
        )
    }
}

/// Compares `sum_j E[X~_j - Y~_j] w^j` against `p A(p w + q)` at each `w`.
pub fn deletion_identity_check(
    x: &BitString,
    y: &BitString,
    q: f64,
    ws: &[Complex<f64>],
) -> Result<Vec<IdentityRow>> {
    let prof = deletion_difference_means::<f64>(x, y, q)?;
    let a = crate::analytic::diff_seq(x, y)?;
    let p = 1.0 - q;
    ws.iter()
        .map(|&w| {
            let lhs = gen_series_at_w(&prof, w)?;
            let rhs = horner_signed(a.coeffs(), w * p + q) * p;
            Ok(IdentityRow::new(w, lhs, rhs))
        })
        .collect()
}

/// Compares `sum_j E[D_j] w^(j+1)` against `sum_k a_k (alpha w / (1 - beta w))^(k+1)`.
/// The report's residual excludes truncation; pair it with [`insertion_series_tail_bound`].
pub fn insertion_identity_check(
    x: &BitString,
    y: &BitString,
    beta: f64,
    horizon: usize,
    ws: &[Complex<f64>],
) -> Result<Vec<IdentityRow>> {
    let gap = exact_insertion_gap_means::<f64>(x, y, beta, horizon)?;
    let a = crate::analytic::diff_seq(x, y)?;
    ws.iter()
        .map(|&w| {
            let lhs = gen_series_at_w(&gap.profile, w)? * w;
            let zeta = crate::analytic::insertion_forward(w, beta)?;
            let rhs = horner_signed(a.coeffs(), zeta) * zeta;
            Ok(IdentityRow::new(w, lhs, rhs))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMode {
    /// Enumerate all `2^n` deletion masks (n <= 12).
    Exact,
    /// Estimate both profiles from `traces` samples each.
    MonteCarlo { traces: usize, seed: u64 },
}

pub const EXACT_MASK_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    pub lhs: Complex<f64>,
    pub rhs: Complex<f64>,
    pub residual: f64,
    /// Zero in exact mode; five standard errors, summed with weights `|w|^j`, otherwise.
    pub radius: f64,
}

/// Per-position means of the deletion-then-substitution output by full mask enumeration.
pub fn substituted_means_by_enumeration(x: &BitString, q: f64, lambda: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n > EXACT_MASK_LIMIT {
        return Err(Error::Range(format!("mask enumeration limited to n <= {EXACT_MASK_LIMIT}")));
    }
    let p = 1.0 - q;
    let mut means = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let kept = mask.count_ones() as i32;
        let prob = p.powi(kept) * q.powi(n as i32 - kept);
        let mut j = 0;
        for k in 0..n {
            if mask >> k & 1 == 1 {
                let bit = x.bits()[k] as f64;
                means[j] += prob * ((1.0 - 2.0 * lambda) * bit + lambda);
                j += 1;
            }
        }
    }
    Ok(means)
}

/// Residual of `sum_j E[X#_j - Y#_j] w^j = (1 - 2 lambda) p A(p w + q)`.
pub fn substitution_gap_check(
    x: &BitString,
    y: &BitString,
    q: f64,
    lambda: f64,
    w: Complex<f64>,
    mode: GapMode,
) -> Result<GapCheck> {
    let spec = ChannelSpec::deletion_substitution(q, lambda)?;
    let a = crate::analytic::diff_seq(x, y)?;
    check_finite(w)?;
    let n = x.len();
    let (diff, radius) = match mode {
        GapMode::Exact => {
            let mx = substituted_means_by_enumeration(x, q, lambda)?;
            let my = substituted_means_by_enumeration(y, q, lambda)?;
            let d: Vec<f64> = mx.iter().zip(&my).map(|(a, b)| a - b).collect();
            (MeanProfile::exact(d), 0.0)
        }
        GapMode::MonteCarlo { traces, seed: s } => {
            let mx = sample_means::<f64>(x, &spec, traces, seed::derive_seed(s, 0, 0), n)?;
            let my = sample_means::<f64>(y, &spec, traces, seed::derive_seed(s, 0, 1), n)?;
            let d = mx.difference(&my);
            let r = w.norm();
            let radius = d
                .stderr
                .as_ref()
                .map(|se| se.iter().enumerate().map(|(j, s)| 5.0 * s * r.powi(j as i32)).sum())
                .unwrap_or(0.0);
            (d, radius)
        }
    };
    let lhs = gen_series_at_w(&diff, w)?;
    let p = 1.0 - q;
    let rhs = horner_signed(a.coeffs(), w * p + q) * (p * (1.0 - 2.0 * lambda));
    Ok(GapCheck { lhs, rhs, residual: (lhs - rhs).norm(), radius })
}

/// Output of [`invert_deletion_means`].
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub string: BitString,
    /// `|value - rounded|` per position, before rounding.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Recovers `x` from its exact (or estimated) deletion means by back-substitution
/// from the last position, rounding each recovered coefficient to {0, 1}.
pub fn invert_deletion_means<T: Scalar>(m: &MeanProfile<T>, q: f64) -> Result<Inversion> {
    if !(0.0..1.0).contains(&q) {
        return param(format!("deletion probability q = {q} outside [0, 1)"));
    }
    let n = m.horizon();
    if n == 0 {
        return param("cannot invert an empty profile");
    }
    if n > binom::MAX_ROW + 1 {
        return Err(Error::Range(format!("profile length {n} exceeds {}", binom::MAX_ROW + 1)));
    }
    let p = T::of(1.0 - q);
    let q_pow = powers::<T>(q, n);
    let mut bits = vec![0u8; n];
    let mut residuals = vec![0.0; n];
    let mut p_inv_pow = T::one() / p;
    let p_inv_pows: Vec<T> = (0..n)
        .map(|_| {
            let v = p_inv_pow;
            p_inv_pow /= p;
            v
        })
        .collect();
    for k in (0..n).rev() {
        let mut carried = T::zero();
        for k2 in k + 1..n {
            if bits[k2] == 1 {
                carried += T::of(binom::choose(k2, k)?) * q_pow[k2 - k];
            }
        }
        let value = (m.means[k] * p_inv_pows[k] - carried).to_f64_lossy();
        if !value.is_finite() || !(-0.5..=1.5).contains(&value) {
            return Err(Error::InversionUnstable { position: k, value });
        }
        let bit = u8::from(value >= 0.5);
        residuals[k] = (value - bit as f64).abs();
        bits[k] = bit;
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(Inversion { string: BitString::new(bits)?, residuals, max_residual })
}
