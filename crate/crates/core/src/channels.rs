//! Deletion, substitution and insertion channels and their compositions.
//!
//! All sampling is deterministic given a seed; see [`crate::seed`] for the
//! derivation of per-trace and per-stage seeds.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{param, Error, Result};
use crate::seed;

/// A nonempty string over {0,1}.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return param("bit string must be nonempty");
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return param(format!("bit {pos} is {} (expected 0 or 1)", bits[pos]));
        }
        Ok(BitString(bits))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0; n])
    }

    pub fn ones(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// The `n`-bit big-endian encoding of `value`, so that integer order and
    /// lexicographic order coincide.
    pub fn from_index(value: u64, n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return param(format!("index encoding needs 1 <= n <= 64, got {n}"));
        }
        if n < 64 && value >> n != 0 {
            return param(format!("{value} does not fit in {n} bits"));
        }
        Ok(BitString(
            (0..n).map(|k| ((value >> (n - 1 - k)) & 1) as u8).collect(),
        ))
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.gen_range(0..2u8)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn weight(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.0)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(parse_bits(s)?)
    }
}

fn write_bits(f: &mut fmt::Formatter<'_>, bits: &[u8]) -> fmt::Result {
    for &b in bits {
        f.write_str(if b == 1 { "1" } else { "0" })?;
    }
    Ok(())
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .enumerate()
        .map(|(i, c)| match c {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => param(format!("character {i} of {s:?} is not '0' or '1'")),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Deletion,
    Substitution,
    Insertion,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Deletion => "del",
            Stage::Substitution => "sub",
            Stage::Insertion => "ins",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "del" | "deletion" => Ok(Stage::Deletion),
            "sub" | "substitution" => Ok(Stage::Substitution),
            "ins" | "insertion" => Ok(Stage::Insertion),
            _ => param(format!("unknown channel stage {s:?}")),
        }
    }
}

/// Default stage order: deletion, then insertion, then substitution.
pub const DEFAULT_ORDER: [Stage; 3] = [Stage::Deletion, Stage::Insertion, Stage::Substitution];

/// Channel parameters and the order in which the enabled stages run.
///
/// The retention probability `p = 1 - q` and `alpha = 1 - beta` are derived
/// on demand and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    deletion_q: f64,
    substitution_lambda: f64,
    insertion_beta: f64,
    stage_order: Vec<Stage>,
}

impl ChannelSpec {
    pub fn new(q: f64, lambda: f64, beta: f64, stage_order: Vec<Stage>) -> Result<Self> {
        check_q(q)?;
        check_lambda(lambda)?;
        check_beta(beta)?;
        for (i, s) in stage_order.iter().enumerate() {
            if stage_order[..i].contains(s) {
                return param(format!("stage {} appears twice", s.name()));
            }
        }
        Ok(ChannelSpec {
            deletion_q: q,
            substitution_lambda: lambda,
            insertion_beta: beta,
            stage_order,
        })
    }

    /// All three stages in [`DEFAULT_ORDER`].
    pub fn full(q: f64, lambda: f64, beta: f64) -> Result<Self> {
        Self::new(q, lambda, beta, DEFAULT_ORDER.to_vec())
    }

    pub fn deletion(q: f64) -> Result<Self> {
        Self::new(q, 0.0, 0.0, vec![Stage::Deletion])
    }

    pub fn deletion_substitution(q: f64, lambda: f64) -> Result<Self> {
        Self::new(q, lambda, 0.0, vec![Stage::Deletion, Stage::Substitution])
    }

    pub fn insertion(beta: f64) -> Result<Self> {
        Self::new(0.0, 0.0, beta, vec![Stage::Insertion])
    }

    pub fn q(&self) -> f64 {
        self.deletion_q
    }

    pub fn p(&self) -> f64 {
        1.0 - self.deletion_q
    }

    pub fn lambda(&self) -> f64 {
        self.substitution_lambda
    }

    pub fn beta(&self) -> f64 {
        self.insertion_beta
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.insertion_beta
    }

    pub fn stage_order(&self) -> &[Stage] {
        &self.stage_order
    }

    pub fn has_stage(&self, stage: Stage) -> bool {
        self.stage_order.contains(&stage)
    }

    /// Deletion probability if the deletion stage is enabled, else 0.
    pub fn effective_q(&self) -> f64 {
        if self.has_stage(Stage::Deletion) {
            self.deletion_q
        } else {
            0.0
        }
    }

    pub fn effective_lambda(&self) -> f64 {
        if self.has_stage(Stage::Substitution) {
            self.substitution_lambda
        } else {
            0.0
        }
    }

    pub fn effective_beta(&self) -> f64 {
        if self.has_stage(Stage::Insertion) {
            self.insertion_beta
        } else {
            0.0
        }
    }

    pub fn is_default_order(&self) -> bool {
        self.stage_order == DEFAULT_ORDER
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return param(format!("deletion probability q = {q} outside [0, 1)"));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..0.5).contains(&lambda) {
        return param(format!("flip probability lambda = {lambda} outside [0, 1/2)"));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&beta) {
        return param(format!("insertion parameter beta = {beta} outside [0, 1)"));
    }
    Ok(())
}

/// One channel output. Positions past the stored bits read as zero padding.
#[derive(Clone, PartialEq, Eq)]
pub struct Trace {
    bits: Vec<u8>,
    origin_seed: u64,
}

impl Trace {
    pub fn new(bits: Vec<u8>, origin_seed: u64) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return param(format!("trace bit {pos} is not 0 or 1"));
        }
        Ok(Trace { bits, origin_seed })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn origin_seed(&self) -> u64 {
        self.origin_seed
    }

    /// Bit `j` of the zero-padded trace.
    #[inline]
    pub fn padded_bit(&self, j: usize) -> u8 {
        self.bits.get(j).copied().unwrap_or(0)
    }

    /// The first `horizon` bits of the zero-padded trace (truncating if longer).
    pub fn padded(&self, horizon: usize) -> impl Iterator<Item = u8> + '_ {
        (0..horizon).map(move |j| self.padded_bit(j))
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_bits(f, &self.bits)
    }
}

impl fmt::Debug for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Trace({self}; seed={:#x})", self.origin_seed)
    }
}

/// `T` channel outputs of the same source string.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub traces: Vec<Trace>,
    pub spec: ChannelSpec,
    pub source_length: usize,
    pub master_seed: u64,
}

impl TraceSet {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn max_trace_len(&self) -> usize {
        self.traces.iter().map(Trace::len).max().unwrap_or(0)
    }
}

// Sampling kernels. They append to `out` so that composed channels can reuse buffers.

pub(crate) fn delete_into<R: Rng + ?Sized>(input: &[u8], q: f64, rng: &mut R, out: &mut Vec<u8>) {
    out.clear();
    if q == 0.0 {
        out.extend_from_slice(input);
        return;
    }
    out.extend(input.iter().copied().filter(|_| rng.gen::<f64>() >= q));
}

pub(crate) fn substitute_in_place<R: Rng + ?Sized>(bits: &mut [u8], lambda: f64, rng: &mut R) {
    if lambda == 0.0 {
        return;
    }
    for b in bits {
        if rng.gen::<f64>() < lambda {
            *b ^= 1;
        }
    }
}

/// Inverse-CDF draw of a Geometric(1 - beta) variable on {1, 2, ...}.
#[inline]
pub(crate) fn geometric<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> usize {
    if beta == 0.0 {
        return 1;
    }
    // u in (0, 1]; G = 1 + floor(ln u / ln beta) has P(G = l) = (1 - beta) beta^(l-1).
    let u = 1.0 - rng.gen::<f64>();
    let g = (u.ln() / beta.ln()).floor();
    if g >= (usize::MAX / 2) as f64 {
        usize::MAX / 2
    } else {
        1 + g as usize
    }
}

pub(crate) fn insertion_cap(n: usize, beta: f64) -> usize {
    (64.0 * n.max(1) as f64 / (1.0 - beta)).ceil() as usize
}

pub(crate) fn insert_into<R: Rng + ?Sized>(
    input: &[u8],
    beta: f64,
    rng: &mut R,
    out: &mut Vec<u8>,
) -> Result<()> {
    out.clear();
    if beta == 0.0 {
        out.extend_from_slice(input);
        return Ok(());
    }
    let cap = insertion_cap(input.len(), beta);
    let push_gap = |out: &mut Vec<u8>, rng: &mut R| -> Result<()> {
        let g = geometric(beta, rng);
        if out.len() + g - 1 > cap {
            return Err(Error::LengthCap { cap });
        }
        out.extend((1..g).map(|_| rng.gen_range(0..2u8)));
        Ok(())
    };
    for &b in input {
        push_gap(out, rng)?;
        if out.len() + 1 > cap {
            return Err(Error::LengthCap { cap });
        }
        out.push(b);
    }
    push_gap(out, rng)
}

/// Deletion channel: every bit is kept independently with probability `1 - q`.
pub fn apply_deletion(x: &BitString, q: f64, seed: u64) -> Result<Trace> {
    check_q(q)?;
    let mut out = Vec::with_capacity(x.len());
    delete_into(x.bits(), q, &mut seed::rng(seed), &mut out);
    Ok(Trace { bits: out, origin_seed: seed })
}

/// Substitution channel: every stored bit flips independently with probability `lambda`.
pub fn apply_substitution(t: &Trace, lambda: f64, seed: u64) -> Result<Trace> {
    check_lambda(lambda)?;
    let mut bits = t.bits.clone();
    substitute_in_place(&mut bits, lambda, &mut seed::rng(seed));
    Ok(Trace { bits, origin_seed: seed })
}

/// Insertion channel: `G_k - 1` fair bits before each `x_k` and `G_n - 1` after the last.
pub fn apply_insertion(x: &BitString, beta: f64, seed: u64) -> Result<Trace> {
    check_beta(beta)?;
    let mut out = Vec::with_capacity(x.len() * 2);
    insert_into(x.bits(), beta, &mut seed::rng(seed), &mut out)?;
    Ok(Trace { bits: out, origin_seed: seed })
}

/// Scratch buffers for running a composed channel many times.
#[derive(Default)]
pub(crate) struct ChannelScratch {
    cur: Vec<u8>,
    next: Vec<u8>,
}

impl ChannelScratch {
    /// Runs every stage of `spec` on `input`; the result is left in the returned slice.
    pub(crate) fn run<'a>(&'a mut self, input: &[u8], spec: &ChannelSpec, seed: u64) -> Result<&'a [u8]> {
        self.cur.clear();
        self.cur.extend_from_slice(input);
        for (i, stage) in spec.stage_order.iter().enumerate() {
            let mut rng = seed::rng(seed::stage_seed(seed, i as u64));
            match stage {
                Stage::Deletion => {
                    delete_into(&self.cur, spec.deletion_q, &mut rng, &mut self.next);
                    std::mem::swap(&mut self.cur, &mut self.next);
                }
                Stage::Substitution => {
                    substitute_in_place(&mut self.cur, spec.substitution_lambda, &mut rng);
                }
                Stage::Insertion => {
                    insert_into(&self.cur, spec.insertion_beta, &mut rng, &mut self.next)?;
                    std::mem::swap(&mut self.cur, &mut self.next);
                }
            }
        }
        Ok(&self.cur)
    }
}

/// Runs the stages of `spec` in order; stage `i` draws from `stage_seed(seed, i)`.
pub fn apply_composed(x: &BitString, spec: &ChannelSpec, seed: u64) -> Result<Trace> {
    let mut scratch = ChannelScratch::default();
    let bits = scratch.run(x.bits(), spec, seed)?.to_vec();
    Ok(Trace { bits, origin_seed: seed })
}

/// `count` independent traces; trace `t` uses `trace_seed(master_seed, t)`.
pub fn sample_traces(x: &BitString, spec: &ChannelSpec, count: usize, master_seed: u64) -> Result<TraceSet> {
    if count == 0 {
        return param("trace count T must be at least 1");
    }
    let traces = (0..count as u64)
        .into_par_iter()
        .map_init(ChannelScratch::default, |scratch, t| {
            let seed = seed::trace_seed(master_seed, t);
            let bits = scratch.run(x.bits(), spec, seed)?.to_vec();
            Ok(Trace { bits, origin_seed: seed })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceSet {
        traces,
        spec: spec.clone(),
        source_length: x.len(),
        master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn bitstring_validation() {
        assert!(BitString::new(vec![]).is_err());
        assert!(BitString::new(vec![0, 2]).is_err());
        assert!("10a".parse::<BitString>().is_err());
        assert_eq!(bs("0110").to_string(), "0110");
        assert_eq!(BitString::from_index(5, 4).unwrap(), bs("0101"));
        assert!(BitString::from_index(16, 4).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ChannelSpec::deletion(1.0).is_err());
        assert!(ChannelSpec::deletion(-0.1).is_err());
        assert!(ChannelSpec::deletion_substitution(0.1, 0.5).is_err());
        assert!(ChannelSpec::insertion(1.0).is_err());
        assert!(ChannelSpec::new(0.1, 0.0, 0.0, vec![Stage::Deletion, Stage::Deletion]).is_err());
        let s = ChannelSpec::full(0.25, 0.1, 0.5).unwrap();
        assert_eq!(s.p(), 0.75);
        assert_eq!(s.alpha(), 0.5);
    }

    #[test]
    fn zero_parameters_are_identity() {
        let x = bs("1011");
        for seed in 0..20 {
            assert_eq!(apply_deletion(&x, 0.0, seed).unwrap().bits(), x.bits());
            assert_eq!(apply_insertion(&x, 0.0, seed).unwrap().bits(), x.bits());
            let t = Trace::new(vec![1, 0, 1], 0).unwrap();
            assert_eq!(apply_substitution(&t, 0.0, seed).unwrap().bits(), t.bits());
            let all = ChannelSpec::full(0.0, 0.0, 0.0).unwrap();
            assert_eq!(apply_composed(&x, &all, seed).unwrap().bits(), x.bits());
        }
    }

    #[test]
    fn deletion_output_is_subsequence() {
        let x = bs("1100101110001011");
        for seed in 0..200 {
            let t = apply_deletion(&x, 0.4, seed).unwrap();
            let mut it = x.bits().iter();
            for b in t.bits() {
                assert!(it.any(|c| c == b), "trace {t} is not a subsequence of {x}");
            }
        }
    }

    #[test]
    fn single_stage_composition_matches_direct_call() {
        let x = bs("110100111");
        let spec = ChannelSpec::deletion(0.3).unwrap();
        for seed in 0..50 {
            let composed = apply_composed(&x, &spec, seed).unwrap();
            let direct = apply_deletion(&x, 0.3, seed::stage_seed(seed, 0)).unwrap();
            assert_eq!(composed.bits(), direct.bits());
        }
    }

    #[test]
    fn sample_traces_rejects_zero_count() {
        let x = bs("1");
        assert!(sample_traces(&x, &ChannelSpec::deletion(0.5).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn singleton_set_matches_apply_composed() {
        let x = bs("1010011");
        let spec = ChannelSpec::full(0.2, 0.1, 0.3).unwrap();
        let ts = sample_traces(&x, &spec, 1, 99).unwrap();
        let direct = apply_composed(&x, &spec, seed::trace_seed(99, 0)).unwrap();
        assert_eq!(ts.traces[0], direct);
    }

    #[test]
    fn padding_is_a_view() {
        let t = Trace::new(vec![1, 1], 0).unwrap();
        assert_eq!(t.padded(4).collect::<Vec<_>>(), vec![1, 1, 0, 0]);
        assert_eq!(t.padded(1).collect::<Vec<_>>(), vec![1]);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn insertion_keeps_source_bits_in_order_and_ends_with_tail() {
        // With beta > 0 the source bits still appear as a subsequence.
        let x = bs("10110");
        for seed in 0..100 {
            let t = apply_insertion(&x, 0.6, seed).unwrap();
            assert!(t.len() >= x.len());
            let mut it = t.bits().iter();
            for b in x.bits() {
                assert!(it.any(|c| c == b));
            }
        }
    }

    #[test]
    fn geometric_law_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // P(G = l) = alpha beta^(l-1); cells l = 1..=10 plus the tail l > 10.
        for beta in [0.2, 0.5, 0.8] {
            let alpha = 1.0 - beta;
            let draws = 100_000;
            let mut rng = seed::rng(1);
            let mut counts = [0u64; 11];
            for _ in 0..draws {
                counts[geometric(beta, &mut rng).min(11) - 1] += 1;
            }
            let stat: f64 = (0..11)
                .map(|i| {
                    let prob = if i < 10 { alpha * beta.powi(i as i32) } else { beta.powi(10) };
                    let e = prob * draws as f64;
                    (counts[i] as f64 - e).powi(2) / e
                })
                .sum();
            let crit = ChiSquared::new(10.0).unwrap().inverse_cdf(0.99);
            assert!(stat < crit, "beta = {beta}: {stat} >= {crit}");
        }
    }
}
