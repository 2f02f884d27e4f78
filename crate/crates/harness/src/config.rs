//! Experiment configuration and its `key = value` text format.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated; an empty value means "unset" for optional keys
//! and "empty" for lists. [`ExperimentConfig::to_text`] writes every key, in a
//! fixed order, so a written config parses back to the same value.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use tracekit::channels::DEFAULT_ORDER;
use tracekit::hardpairs::SearchMode;
use tracekit::{BitString, ChannelSpec, Stage};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Simulate,
    Means,
    VerifyIdentity,
    Distinguish,
    Reconstruct,
    Weakbound,
    Hardpair,
    Sweep,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Simulate,
        Task::Means,
        Task::VerifyIdentity,
        Task::Distinguish,
        Task::Reconstruct,
        Task::Weakbound,
        Task::Hardpair,
        Task::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Means => "means",
            Task::VerifyIdentity => "verify-identity",
            Task::Distinguish => "distinguish",
            Task::Reconstruct => "reconstruct",
            Task::Weakbound => "weakbound",
            Task::Hardpair => "hardpair",
            Task::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructMode {
    Unbeaten,
    Bma,
    MeanInvert,
}

impl ReconstructMode {
    pub fn name(self) -> &'static str {
        match self {
            ReconstructMode::Unbeaten => "unbeaten",
            ReconstructMode::Bma => "bma",
            ReconstructMode::MeanInvert => "meaninvert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    /// Reconstruction success rate per cell.
    Success,
    /// Smallest trace count reaching `target_success`, by bisection.
    T90,
    /// Empirical single-position distinguishing advantage on a hard pair.
    Advantage,
}

impl SweepMetric {
    pub fn name(self) -> &'static str {
        match self {
            SweepMetric::Success => "success",
            SweepMetric::T90 => "t90",
            SweepMetric::Advantage => "advantage",
        }
    }
}

macro_rules! named_enum_parse {
    ($ty:ty, $what:literal, [$($v:expr),+ $(,)?]) => {
        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                [$($v),+]
                    .into_iter()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| format!("unknown {} {s:?}", $what))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum_parse!(Task, "task", [
    Task::Simulate,
    Task::Means,
    Task::VerifyIdentity,
    Task::Distinguish,
    Task::Reconstruct,
    Task::Weakbound,
    Task::Hardpair,
    Task::Sweep,
]);
named_enum_parse!(ReconstructMode, "mode", [
    ReconstructMode::Unbeaten,
    ReconstructMode::Bma,
    ReconstructMode::MeanInvert,
]);
named_enum_parse!(SweepMetric, "metric", [SweepMetric::Success, SweepMetric::T90, SweepMetric::Advantage]);

fn search_name(m: SearchMode) -> &'static str {
    match m {
        SearchMode::Exhaustive => "exhaustive",
        SearchMode::Anneal => "anneal",
    }
}

fn parse_search(s: &str) -> std::result::Result<SearchMode, String> {
    match s {
        "exhaustive" => Ok(SearchMode::Exhaustive),
        "anneal" => Ok(SearchMode::Anneal),
        _ => Err(format!("unknown search mode {s:?}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub n: usize,
    pub q: f64,
    pub lambda: f64,
    pub beta: f64,
    pub order: Vec<Stage>,
    /// Traces per trace set.
    pub traces: usize,
    pub trials: usize,
    pub seed: u64,
    pub x: Option<BitString>,
    pub y: Option<BitString>,
    pub mode: ReconstructMode,
    pub search: SearchMode,
    pub degree: usize,
    pub budget: u64,
    /// Output horizon for mean profiles; 0 picks one from the channel.
    pub horizon: usize,
    pub delta: f64,
    pub l_values: Vec<usize>,
    /// Arc grid size; 0 means `max(4096, 64 n L)`.
    pub arc_samples: usize,
    pub tv_t: Vec<u64>,
    pub metric: SweepMetric,
    pub target_success: f64,
    pub sweep_n: Vec<usize>,
    pub sweep_q: Vec<f64>,
    pub sweep_lambda: Vec<f64>,
    pub sweep_beta: Vec<f64>,
    pub sweep_t: Vec<usize>,
    pub max_trials: u64,
    pub trace_file: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Simulate,
            n: 10,
            q: 0.3,
            lambda: 0.0,
            beta: 0.0,
            order: DEFAULT_ORDER.to_vec(),
            traces: 1000,
            trials: 20,
            seed: 1,
            x: None,
            y: None,
            mode: ReconstructMode::Unbeaten,
            search: SearchMode::Exhaustive,
            degree: 12,
            budget: 100_000,
            horizon: 0,
            delta: 0.05,
            l_values: vec![2, 3, 4],
            arc_samples: 0,
            tv_t: vec![10, 100, 1000],
            metric: SweepMetric::Success,
            target_success: 0.9,
            sweep_n: Vec::new(),
            sweep_q: Vec::new(),
            sweep_lambda: Vec::new(),
            sweep_beta: Vec::new(),
            sweep_t: Vec::new(),
            max_trials: 2_000_000,
            trace_file: None,
            out: PathBuf::from("tracekit-out"),
        }
    }
}

/// Keys in serialisation order.
pub const KEYS: &[&str] = &[
    "task", "n", "q", "lambda", "beta", "order", "T", "trials", "seed", "x", "y", "mode", "search",
    "degree", "budget", "horizon", "delta", "L", "arc_samples", "tv_T", "metric", "target_success",
    "sweep_n", "sweep_q", "sweep_lambda", "sweep_beta", "sweep_T", "max_trials", "trace_file", "out",
];

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("cannot parse list element {s:?}")))
        .collect()
}

fn parse_one<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?}"))
}

impl ExperimentConfig {
    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: &Option<BitString>| v.as_ref().map(ToString::to_string).unwrap_or_default();
        Some(match key {
            "task" => self.task.to_string(),
            "n" => self.n.to_string(),
            "q" => self.q.to_string(),
            "lambda" => self.lambda.to_string(),
            "beta" => self.beta.to_string(),
            "order" => self.order.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
            "T" => self.traces.to_string(),
            "trials" => self.trials.to_string(),
            "seed" => self.seed.to_string(),
            "x" => opt(&self.x),
            "y" => opt(&self.y),
            "mode" => self.mode.to_string(),
            "search" => search_name(self.search).to_string(),
            "degree" => self.degree.to_string(),
            "budget" => self.budget.to_string(),
            "horizon" => self.horizon.to_string(),
            "delta" => self.delta.to_string(),
            "L" => join(&self.l_values),
            "arc_samples" => self.arc_samples.to_string(),
            "tv_T" => join(&self.tv_t),
            "metric" => self.metric.to_string(),
            "target_success" => self.target_success.to_string(),
            "sweep_n" => join(&self.sweep_n),
            "sweep_q" => join(&self.sweep_q),
            "sweep_lambda" => join(&self.sweep_lambda),
            "sweep_beta" => join(&self.sweep_beta),
            "sweep_T" => join(&self.sweep_t),
            "max_trials" => self.max_trials.to_string(),
            "trace_file" => self.trace_file.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Sets one key from its textual value. Errors name the offending key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let wrap = |r: std::result::Result<(), String>| r.map_err(|m| HarnessError::usage(key, m));
        let opt_bits = |v: &str| -> std::result::Result<Option<BitString>, String> {
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse::<BitString>().map(Some).map_err(|e| e.to_string())
            }
        };
        wrap((|| {
            match key {
                "task" => self.task = value.parse()?,
                "n" => self.n = parse_one(value)?,
                "q" => self.q = parse_one(value)?,
                "lambda" => self.lambda = parse_one(value)?,
                "beta" => self.beta = parse_one(value)?,
                "order" => {
                    self.order = parse_list::<String>(value)?
                        .iter()
                        .map(|s| s.parse::<Stage>().map_err(|e| e.to_string()))
                        .collect::<std::result::Result<_, _>>()?
                }
                "T" => self.traces = parse_one(value)?,
                "trials" => self.trials = parse_one(value)?,
                "seed" => self.seed = parse_one(value)?,
                "x" => self.x = opt_bits(value)?,
                "y" => self.y = opt_bits(value)?,
                "mode" => self.mode = value.parse()?,
                "search" => self.search = parse_search(value)?,
                "degree" => self.degree = parse_one(value)?,
                "budget" => self.budget = parse_one(value)?,
                "horizon" => self.horizon = parse_one(value)?,
                "delta" => self.delta = parse_one(value)?,
                "L" => self.l_values = parse_list(value)?,
                "arc_samples" => self.arc_samples = parse_one(value)?,
                "tv_T" => self.tv_t = parse_list(value)?,
                "metric" => self.metric = value.parse()?,
                "target_success" => self.target_success = parse_one(value)?,
                "sweep_n" => self.sweep_n = parse_list(value)?,
                "sweep_q" => self.sweep_q = parse_list(value)?,
                "sweep_lambda" => self.sweep_lambda = parse_list(value)?,
                "sweep_beta" => self.sweep_beta = parse_list(value)?,
                "sweep_T" => self.sweep_t = parse_list(value)?,
                "max_trials" => self.max_trials = parse_one(value)?,
                "trace_file" => {
                    self.trace_file = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
                }
                "out" => self.out = PathBuf::from(value),
                _ => return Err("unknown configuration key".to_string()),
            }
            Ok(())
        })())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# tracekit experiment config\n");
        for key in KEYS {
            let v = self.get(key).expect("every listed key is readable");
            s.push_str(key);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::usage(format!("line {}", lineno + 1), "expected `key = value`")
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn channel(&self) -> Result<ChannelSpec> {
        ChannelSpec::new(self.q, self.lambda, self.beta, self.order.clone())
            .map_err(|e| HarnessError::usage("q/lambda/beta/order", e.to_string()))
    }

    /// Checks cross-field constraints; errors carry the field name.
    pub fn validate(&self) -> Result<()> {
        self.channel()?;
        let bad = |f: &str, m: &str| Err(HarnessError::usage(f, m));
        if self.n == 0 {
            return bad("n", "must be at least 1");
        }
        if self.traces == 0 {
            return bad("T", "must be at least 1");
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", "must lie in (0, 1)");
        }
        if !(self.target_success > 0.0 && self.target_success <= 1.0) {
            return bad("target_success", "must lie in (0, 1]");
        }
        if self.l_values.contains(&0) {
            return bad("L", "arc parameters must be at least 1");
        }
        for (f, s) in [("x", &self.x), ("y", &self.y)] {
            if let Some(s) = s {
                if s.len() != self.n {
                    return bad(f, &format!("has length {} but n = {}", s.len(), self.n));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_key_is_readable() {
        let c = ExperimentConfig::default();
        for k in KEYS {
            assert!(c.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_text("q = abc").unwrap_err();
        assert!(err.to_string().starts_with("q:"), "{err}");
        let err = ExperimentConfig::from_text("bogus = 1").unwrap_err();
        assert!(err.to_string().starts_with("bogus:"));
        let err = ExperimentConfig::from_text("no equals sign").unwrap_err();
        assert!(err.to_string().starts_with("line 1:"));
        let mut c = ExperimentConfig::default();
        c.q = 1.5;
        assert!(c.validate().unwrap_err().to_string().contains("q/lambda/beta/order"));
        c.q = 0.3;
        c.x = Some("101".parse().unwrap());
        assert!(c.validate().unwrap_err().to_string().starts_with("x:"));
    }

    #[test]
    fn comments_and_lists() {
        let c = ExperimentConfig::from_text(
            "# header\ntask = sweep  # trailing\nsweep_q = 0.1, 0.2,0.3\norder = del,sub\nx =\n",
        )
        .unwrap();
        assert_eq!(c.task, Task::Sweep);
        assert_eq!(c.sweep_q, vec![0.1, 0.2, 0.3]);
        assert_eq!(c.order, vec![Stage::Deletion, Stage::Substitution]);
        assert_eq!(c.x, None);
    }
}
