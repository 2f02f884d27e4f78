//! Pairwise single-position tests and the reconstructions built on them.
//!
//! For two candidates `x != y` the test looks at one output position `j*`
//! where their exact means differ, and `y` beats `x` when the observed mean at
//! `j*` is at least as close to `y`'s mean as to `x`'s. The estimate is the
//! unique candidate no other candidate beats, if there is one.

use crate::channels::{BitString, ChannelSpec, Stage, TraceSet};
use crate::error::{param, Error, Result};
use crate::meanstats::{self, MeanAccumulator};

/// How `j*` is chosen among positions where the two exact profiles differ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum IndexRule {
    /// Largest gap; ties go to the smaller index.
    #[default]
    Argmax,
    /// Smallest index whose gap is at least the threshold, falling back to
    /// the argmax when no index reaches it.
    FirstAbove(f64),
}

/// The single-position test for an ordered pair `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTestPlan {
    pub j_star: usize,
    pub eta: f64,
    pub mean_x: f64,
    pub mean_y: f64,
}

impl PairTestPlan {
    /// The plan for `(y, x)`.
    pub fn swapped(self) -> Self {
        PairTestPlan { mean_x: self.mean_y, mean_y: self.mean_x, ..self }
    }
}

/// Exact means of the observed (padded) output for `spec`. Supports deletion
/// and substitution in either order; an enabled insertion stage with `beta > 0` is rejected.
pub fn observed_means(x: &BitString, spec: &ChannelSpec) -> Result<Vec<f64>> {
    if spec.effective_beta() > 0.0 {
        return param("pairwise tests support deletion and substitution channels only");
    }
    let order = spec.stage_order();
    let del = order.iter().position(|&s| s == Stage::Deletion);
    let sub = order.iter().position(|&s| s == Stage::Substitution);
    if let (Some(d), Some(s)) = (del, sub) {
        if s < d {
            // Flips act on every input bit before deletion.
            let l = spec.lambda();
            let a: Vec<f64> = x.bits().iter().map(|&b| (1.0 - 2.0 * l) * b as f64 + l).collect();
            return Ok(meanstats::deletion_means_of(&a, spec.q())?.means);
        }
    }
    Ok(meanstats::exact_deletion_substitution_means::<f64>(x, spec.effective_q(), spec.effective_lambda())?.means)
}

fn plan_from_profiles(mx: &[f64], my: &[f64], rule: IndexRule) -> Option<PairTestPlan> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (a, b)) in mx.iter().zip(my).enumerate() {
        let gap = (a - b).abs();
        if let IndexRule::FirstAbove(threshold) = rule {
            if gap > 0.0 && gap >= threshold {
                best = Some((j, gap));
                break;
            }
        }
        if gap > 0.0 && best.is_none_or(|(_, g)| gap > g) {
            best = Some((j, gap));
        }
    }
    best.map(|(j, eta)| PairTestPlan { j_star: j, eta, mean_x: mx[j], mean_y: my[j] })
}

pub fn select_index(x: &BitString, y: &BitString, spec: &ChannelSpec) -> Result<PairTestPlan> {
    select_index_with(x, y, spec, IndexRule::Argmax)
}

pub fn select_index_with(x: &BitString, y: &BitString, spec: &ChannelSpec, rule: IndexRule) -> Result<PairTestPlan> {
    if x.len() != y.len() {
        return param(format!("length mismatch: {} vs {}", x.len(), y.len()));
    }
    if x == y {
        return param("a pair test needs two different strings");
    }
    let mx = observed_means(x, spec)?;
    let my = observed_means(y, spec)?;
    plan_from_profiles(&mx, &my, rule)
        .ok_or_else(|| Error::Domain(format!("exact means of {x} and {y} coincide at every position")))
}

/// Whether `y` beats `x`: `|s - mean_y| <= |s - mean_x|`. An exact midpoint beats both ways.
pub fn beats(sample_mean_at_j: f64, plan: &PairTestPlan) -> bool {
    (sample_mean_at_j - plan.mean_y).abs() <= (sample_mean_at_j - plan.mean_x).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub estimate: BitString,
    pub unbeaten_count: usize,
    /// Set when no candidate is unbeaten; the estimate is then the
    /// lexicographically smallest candidate.
    pub ambiguous: bool,
}

/// Upper limit on the length of auto-enumerated candidate sets.
pub const MAX_ENUMERATED_LEN: usize = 20;
/// Upper limit on the length for the quadratic all-pairs check.
pub const MAX_ALL_PAIRS_LEN: usize = 12;

/// All `2^n` strings of length `n` in lexicographic order.
pub fn all_strings(n: usize) -> Result<Vec<BitString>> {
    if n == 0 || n > MAX_ENUMERATED_LEN {
        return Err(Error::Range(format!(
            "candidate enumeration needs 1 <= n <= {MAX_ENUMERATED_LEN}, got {n}"
        )));
    }
    (0..1u64 << n).map(|v| BitString::from_index(v, n)).collect()
}

/// Candidate set with precomputed exact profiles, reusable across trace sets.
#[derive(Debug, Clone)]
pub struct UnbeatenReconstructor {
    candidates: Vec<BitString>,
    profiles: Vec<Vec<f64>>,
    smallest: usize,
    rule: IndexRule,
}

impl UnbeatenReconstructor {
    pub fn new(candidates: Vec<BitString>, spec: &ChannelSpec, rule: IndexRule) -> Result<Self> {
        let Some(first) = candidates.first() else {
            return param("candidate set is empty");
        };
        let n = first.len();
        if let Some(c) = candidates.iter().find(|c| c.len() != n) {
            return param(format!("candidate {c} has length {} (expected {n})", c.len()));
        }
        let mut sorted: Vec<&BitString> = candidates.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return param("candidates must be pairwise distinct");
        }
        let profiles = candidates
            .iter()
            .map(|c| observed_means(c, spec))
            .collect::<Result<Vec<_>>>()?;
        let smallest = (0..candidates.len())
            .min_by(|&a, &b| candidates[a].cmp(&candidates[b]))
            .expect("nonempty");
        Ok(UnbeatenReconstructor { candidates, profiles, smallest, rule })
    }

    pub fn candidates(&self) -> &[BitString] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn string_len(&self) -> usize {
        self.candidates[0].len()
    }

    /// Plan for the ordered pair (candidate `i`, candidate `k`).
    pub fn plan(&self, i: usize, k: usize) -> Option<PairTestPlan> {
        plan_from_profiles(&self.profiles[i], &self.profiles[k], self.rule)
    }

    /// Whether candidate `k` beats candidate `i` given observed means.
    /// Candidates with identical exact profiles cannot be told apart; each beats the other.
    fn challenger_beats(&self, observed: &[f64], i: usize, k: usize) -> bool {
        match self.plan(i, k) {
            Some(plan) => beats(observed[plan.j_star], &plan),
            None => true,
        }
    }

    fn is_unbeaten(&self, observed: &[f64], i: usize) -> bool {
        (0..self.len()).all(|k| k == i || !self.challenger_beats(observed, i, k))
    }

    fn finish(&self, unbeaten: Option<usize>) -> ReconstructionResult {
        match unbeaten {
            Some(i) => ReconstructionResult {
                estimate: self.candidates[i].clone(),
                unbeaten_count: 1,
                ambiguous: false,
            },
            None => ReconstructionResult {
                estimate: self.candidates[self.smallest].clone(),
                unbeaten_count: 0,
                ambiguous: true,
            },
        }
    }

    fn check_observed(&self, observed: &[f64]) -> Result<()> {
        if observed.len() < self.string_len() {
            return param(format!(
                "observed means cover {} positions, need {}",
                observed.len(),
                self.string_len()
            ));
        }
        Ok(())
    }

    /// Single-elimination tournament followed by a confirmation pass, `O(|candidates|)` pair tests.
    ///
    /// A challenger replaces the incumbent whenever it beats it. An unbeaten
    /// candidate beats every incumbent it meets and is never displaced, so it
    /// is the final incumbent; the confirmation pass rejects the incumbent when
    /// no unbeaten candidate exists.
    pub fn reconstruct_from_means(&self, observed: &[f64]) -> Result<ReconstructionResult> {
        self.check_observed(observed)?;
        let mut incumbent = 0;
        for k in 1..self.len() {
            if self.challenger_beats(observed, incumbent, k) {
                incumbent = k;
            }
        }
        let unbeaten = self.is_unbeaten(observed, incumbent).then_some(incumbent);
        Ok(self.finish(unbeaten))
    }

    /// Quadratic reference: counts every unbeaten candidate directly.
    pub fn reconstruct_all_pairs(&self, observed: &[f64]) -> Result<ReconstructionResult> {
        if self.string_len() > MAX_ALL_PAIRS_LEN {
            return Err(Error::Range(format!(
                "all-pairs mode is limited to n <= {MAX_ALL_PAIRS_LEN}"
            )));
        }
        self.check_observed(observed)?;
        let unbeaten: Vec<usize> = (0..self.len()).filter(|&i| self.is_unbeaten(observed, i)).collect();
        // Every pair has a winner under the symmetric plan, so two unbeaten candidates are impossible.
        assert!(unbeaten.len() <= 1, "at most one candidate can be unbeaten, found {}", unbeaten.len());
        Ok(self.finish(unbeaten.first().copied()))
    }

    pub fn reconstruct(&self, ts: &TraceSet) -> Result<ReconstructionResult> {
        let observed = trace_means(ts, self.string_len())?;
        self.reconstruct_from_means(&observed)
    }
}

fn trace_means(ts: &TraceSet, horizon: usize) -> Result<Vec<f64>> {
    if ts.is_empty() {
        return param("trace set is empty");
    }
    let mut acc = MeanAccumulator::new(horizon);
    for t in &ts.traces {
        acc.add(t.bits());
    }
    Ok(acc.profile::<f64>()?.means)
}

/// Unbeaten reconstruction over an explicit candidate list (tournament mode).
pub fn reconstruct_unbeaten(ts: &TraceSet, candidates: &[BitString], spec: &ChannelSpec) -> Result<ReconstructionResult> {
    UnbeatenReconstructor::new(candidates.to_vec(), spec, IndexRule::Argmax)?.reconstruct(ts)
}

/// Smallest `T` with `2^n exp(-T eta^2 / 2) <= delta`.
pub fn chernoff_sample_size(eta: f64, n: u32, delta: f64) -> Result<u64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return param(format!("mean gap eta = {eta} outside (0, 1]"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return param(format!("failure probability delta = {delta} outside (0, 1)"));
    }
    let exact = 2.0 / (eta * eta) * (n as f64 * std::f64::consts::LN_2 - delta.ln());
    let mut t = exact.ceil();
    // Undo a ceiling pushed up by rounding noise in the logarithms.
    if t - 1.0 >= exact * (1.0 - 1e-12) {
        t -= 1.0;
    }
    Ok(t.max(1.0) as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmaResult {
    pub estimate: BitString,
    /// First position at which every trace was exhausted; the rest is zero-filled.
    pub exhausted_at: Option<usize>,
}

/// Bitwise majority alignment. Each trace keeps a pointer; at every step the
/// pointed bits vote (exhausted traces abstain, ties go to 0) and only the
/// traces that agreed with the majority advance.
pub fn bma_reconstruct(ts: &TraceSet, n: usize) -> Result<BmaResult> {
    if n == 0 {
        return param("target length must be at least 1");
    }
    let traces: Vec<&[u8]> = ts.traces.iter().map(|t| t.bits()).filter(|b| !b.is_empty()).collect();
    let mut ptr = vec![0usize; traces.len()];
    let mut out = Vec::with_capacity(n);
    let mut exhausted_at = None;
    for i in 0..n {
        let (mut ones, mut zeros) = (0usize, 0usize);
        for (t, &p) in traces.iter().zip(&ptr) {
            match t.get(p) {
                Some(1) => ones += 1,
                Some(_) => zeros += 1,
                None => {}
            }
        }
        if ones + zeros == 0 {
            exhausted_at = Some(i);
            out.resize(n, 0);
            break;
        }
        let bit = u8::from(ones > zeros);
        for (t, p) in traces.iter().zip(ptr.iter_mut()) {
            if t.get(*p) == Some(&bit) {
                *p += 1;
            }
        }
        out.push(bit);
    }
    Ok(BmaResult { estimate: BitString::new(out)?, exhausted_at })
}
