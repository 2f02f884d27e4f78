use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;

use tracekit::hardpairs::SearchMode;
use tracekit::{BitString, Stage};
use tracekit_harness::config::{ExperimentConfig, ReconstructMode, SweepMetric, Task};
use tracekit_harness::runner::{self, run_task, RUN_LOG};
use tracekit_harness::sweep;
use tracekit_harness::HarnessError;

fn cfg(task: Task, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.task = task;
    c.out = out.to_path_buf();
    c
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![0.0f64..1.0, Just(0.0), Just(0.5), (0u32..1000).prop_map(|k| k as f64 / 1000.0)]
}

fn bits(n: usize) -> impl Strategy<Value = Option<BitString>> {
    prop::option::of(prop::collection::vec(0u8..=1, n).prop_map(|v| BitString::new(v).unwrap()))
}

prop_compose! {
    fn any_config()(
        task in prop::sample::select(Task::ALL.to_vec()),
        n in 1usize..30,
        q in finite(), lambda in finite(), beta in finite(),
        order in prop::sample::subsequence(vec![Stage::Deletion, Stage::Insertion, Stage::Substitution], 1..=3).prop_shuffle(),
        traces in 1usize..1_000_000, trials in 1usize..1000, seed in any::<u64>(),
        mode in prop::sample::select(vec![ReconstructMode::Unbeaten, ReconstructMode::Bma, ReconstructMode::MeanInvert]),
        search in prop::sample::select(vec![SearchMode::Exhaustive, SearchMode::Anneal]),
        degree in 0usize..16, budget in any::<u64>(), horizon in 0usize..100, delta in 0.001f64..0.999,
        l_values in prop::collection::vec(1usize..8, 0..4),
        arc_samples in 0usize..10_000,
        tv_t in prop::collection::vec(1u64..10_000, 0..4),
        metric in prop::sample::select(vec![SweepMetric::Success, SweepMetric::T90, SweepMetric::Advantage]),
        target_success in 0.01f64..1.0,
        sweep_n in prop::collection::vec(1usize..20, 0..3),
        sweep_q in prop::collection::vec(finite(), 0..3),
        sweep_t in prop::collection::vec(1usize..5000, 0..3),
        max_trials in any::<u64>(),
        out in "[a-z][a-z0-9_/]{0,12}",
        trace_file in prop::option::of("[a-z][a-z0-9_.]{0,8}"),
    )(
        x in bits(n), y in bits(n),
        task in Just(task), n in Just(n), q in Just(q), lambda in Just(lambda), beta in Just(beta),
        order in Just(order), traces in Just(traces), trials in Just(trials), seed in Just(seed),
        mode in Just(mode), search in Just(search), degree in Just(degree), budget in Just(budget),
        horizon in Just(horizon), delta in Just(delta), l_values in Just(l_values),
        arc_samples in Just(arc_samples), tv_t in Just(tv_t), metric in Just(metric),
        target_success in Just(target_success), sweep_n in Just(sweep_n), sweep_q in Just(sweep_q),
        sweep_t in Just(sweep_t), max_trials in Just(max_trials), out in Just(out), trace_file in Just(trace_file),
    ) -> ExperimentConfig {
        ExperimentConfig {
            task, n, q, lambda, beta, order, traces, trials, seed, x, y, mode, search, degree, budget,
            horizon, delta, l_values, arc_samples, tv_t, metric, target_success, sweep_n,
            sweep_q: sweep_q.clone(), sweep_lambda: sweep_q.iter().map(|v| v / 3.0).collect(),
            sweep_beta: sweep_q, sweep_t, max_trials,
            trace_file: trace_file.map(Into::into), out: out.into(),
        }
    }
}

proptest! {
    #[test]
    fn config_text_round_trip(c in any_config()) {
        prop_assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }
}

#[test]
fn csv_headers_are_stable() {
    assert_eq!(tracekit::MeanProfile64::CSV_HEADER, "j,mean,stderr,kind");
    assert_eq!(tracekit::meanstats::IdentityRow::CSV_HEADER, "w_re,w_im,lhs_re,lhs_im,rhs_re,rhs_im,residual");
    assert_eq!(tracekit::analytic::WeakBoundReport::CSV_HEADER, "n,L,max,bound,consistent");
    assert_eq!(runner::DISTINGUISH_HEADER, "trial,j_star,sample_mean,wrong");
    assert_eq!(runner::RECONSTRUCT_HEADER, "trial,x,estimate,success,flagged");
    assert_eq!(runner::HARDPAIR_GAPS_HEADER, "j,b_j,contour_b_j,baseline_b_j");
    assert_eq!(runner::HARDPAIR_TV_HEADER, "T,max_b,bound,exact_tv,ok");
    assert_eq!(sweep::SUCCESS_HEADER, "n,q,lambda,beta,T,trials,successes,rate");
    assert_eq!(sweep::T90_HEADER, "n,q,lambda,beta,trials,t90,log10_t90");
    assert_eq!(sweep::ADVANTAGE_HEADER, "n,q,T,trials,advantage,stderr,max_b,bound,exact_tv,dominated");
}

#[test]
fn every_task_writes_its_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: Vec<(Task, &str, &str)> = vec![
        (Task::Means, "means.csv", "j,mean,stderr,kind"),
        (Task::VerifyIdentity, "identity.csv", "w_re,w_im,lhs_re,lhs_im,rhs_re,rhs_im,residual"),
        (Task::Distinguish, "distinguish.csv", "trial,j_star,sample_mean,wrong"),
        (Task::Reconstruct, "reconstruct.csv", "trial,x,estimate,success,flagged"),
        (Task::Weakbound, "weakbound.csv", "n,L,max,bound,consistent"),
        (Task::Sweep, "sweep.csv", "n,q,lambda,beta,T,trials,successes,rate"),
    ];
    for (task, file, header) in cases {
        let mut c = cfg(task, d);
        c.n = 6;
        c.trials = 3;
        c.traces = 200;
        run_task(&c).unwrap();
        let got = fs::read(d.join(file)).unwrap();
        assert!(got.starts_with(format!("{header}\n").as_bytes()), "{file}");
    }
    let mut c = cfg(Task::Hardpair, d);
    c.n = 40;
    c.degree = 6;
    run_task(&c).unwrap();
    assert_eq!(first_line(&d.join("hardpair_gaps.csv")), "j,b_j,contour_b_j,baseline_b_j");
    assert_eq!(first_line(&d.join("hardpair_tv.csv")), "T,max_b,bound,exact_tv,ok");
}

#[test]
fn simulate_writes_header_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Simulate, dir.path());
    c.traces = 3;
    run_task(&c).unwrap();
    let text = fs::read_to_string(dir.path().join("traces.txt")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("# tracekit v1 n=10 q=0.3"));
}

#[test]
fn means_from_a_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Simulate, dir.path());
    c.traces = 500;
    c.trace_file = Some(dir.path().join("t.txt"));
    run_task(&c).unwrap();
    c.task = Task::Means;
    let r = run_task(&c).unwrap();
    assert!(r.summary.contains("empirical"));
}

#[test]
fn reconstruct_from_a_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Simulate, dir.path());
    c.n = 8;
    c.q = 0.2;
    c.x = Some("10110010".parse().unwrap());
    c.traces = 20_000;
    c.trace_file = Some(dir.path().join("t.txt"));
    run_task(&c).unwrap();
    let mut r = ExperimentConfig::default();
    r.task = Task::Reconstruct;
    r.trace_file = c.trace_file.clone();
    r.out = dir.path().to_path_buf();
    let rec = run_task(&r).unwrap();
    assert!(rec.summary.ends_with(": 10110010"), "{}", rec.summary);
}

#[test]
fn verify_identity_at_n12() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::VerifyIdentity, dir.path());
    c.n = 12;
    c.q = 0.5;
    let r = run_task(&c).unwrap();
    assert!(!r.diagnostic);
    assert_eq!(r.outcomes.len(), runner::IDENTITY_POINTS);
    assert!(r.outcomes.iter().all(|o| o.value <= 1e-9));
}

#[test]
fn runs_are_reproducible_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Reconstruct, dir.path());
    c.mode = ReconstructMode::Bma;
    c.n = 30;
    c.q = 0.1;
    c.traces = 40;
    c.trials = 8;
    let a = run_task(&c).unwrap();
    let b = run_task(&c).unwrap();
    assert_eq!(a.outcome_values(), b.outcome_values());
    assert_eq!(a.config_hash, b.config_hash);
    let log = fs::read_to_string(dir.path().join(RUN_LOG)).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(log.lines().all(|l| l.starts_with(&format!("config={}", a.config_hash))));
    c.seed += 1;
    assert_ne!(run_task(&c).unwrap().config_hash, a.config_hash);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Reconstruct, dir.path());
    c.n = 8;
    c.traces = 2000;
    c.trials = 4;
    let base = run_task(&c).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let other = pool.install(|| run_task(&c).unwrap());
    assert_eq!(base.outcome_values(), other.outcome_values());
}

#[test]
fn success_rate_falls_with_q() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Sweep, dir.path());
    c.n = 10;
    c.traces = 300;
    c.trials = 40;
    c.sweep_q = vec![0.1, 0.2, 0.3, 0.4, 0.5];
    let cells = sweep::sweep(&c).unwrap();
    let rates: Vec<f64> = cells.iter().map(|r| r.value).collect();
    // Nonincreasing up to 0.15 of sampling noise.
    for w in rates.windows(2) {
        assert!(w[1] <= w[0] + 0.15, "{rates:?}");
    }
    assert!(rates[0] > rates[4], "{rates:?}");
    let csv = fs::read_to_string({
        run_task(&c).unwrap();
        dir.path().join("sweep.csv")
    })
    .unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn single_cell_sweep_matches_run_task() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Sweep, dir.path());
    c.n = 7;
    c.traces = 400;
    c.trials = 10;
    let cells = sweep::sweep(&c).unwrap();
    assert_eq!(cells.len(), 1);
    let mut r = c.clone();
    r.task = Task::Reconstruct;
    r.seed = cells[0].seed;
    let rec = run_task(&r).unwrap();
    let successes = rec.outcomes.iter().filter(|o| o.value == 1.0).count();
    assert_eq!(successes, cells[0].successes);
}

#[test]
fn advantage_is_dominated_by_coupling_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Sweep, dir.path());
    c.metric = SweepMetric::Advantage;
    c.n = 60;
    c.q = 0.5;
    c.degree = 6;
    c.trials = 400;
    c.sweep_t = vec![10, 100, 1000];
    let cells = sweep::sweep(&c).unwrap();
    for r in &cells {
        assert!(r.dominated(), "{r:?}");
        assert!(r.exact_tv <= r.bound);
    }
}

#[test]
fn t90_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Sweep, dir.path());
    c.metric = SweepMetric::T90;
    c.sweep_n = vec![5, 6];
    c.trials = 10;
    c.traces = 20_000;
    let a = sweep::sweep(&c).unwrap();
    let b = sweep::sweep(&c).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.value.is_finite() && r.value >= 10.0));
}

#[test]
fn oversized_sweep_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Sweep, dir.path());
    c.sweep_n = vec![4, 5, 6];
    c.trials = 100;
    c.max_trials = 299;
    assert!(matches!(run_task(&c), Err(HarnessError::Budget { needed: 300, budget: 299 })));
    assert!(!dir.path().join("sweep.csv").exists());
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tracekit")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, _) = cli(&["simulate", "--n", "8", "--T", "3", "--seed", "4", "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("3 traces"));

    let (code, _, stderr) = cli(&["simulate", "--q", "1.5", "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("q/lambda/beta/order"));

    let (code, _, stderr) = cli(&["simulate", "--set", "trials=lots", "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("trials:"));

    // Enumerating 2^24 candidates is out of range.
    let (code, _, _) = cli(&["reconstruct", "--n", "24", "--T", "10", "--trials", "1", "--out", out]);
    assert_eq!(code, 3);

    // Mean inversion at a long length and heavy deletion is numerically unstable.
    let (code, stdout, _) =
        cli(&["reconstruct", "--mode", "meaninvert", "--n", "60", "--q", "0.8", "--T", "50", "--trials", "2", "--out", out]);
    assert_eq!(code, 4, "{stdout}");
}

#[test]
fn cli_reads_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = cfg(Task::Weakbound, dir.path());
    c.n = 5;
    c.l_values = vec![2, 3];
    let path = dir.path().join("run.cfg");
    fs::write(&path, c.to_text()).unwrap();
    let (code, stdout, _) = cli(&["--config", path.to_str().unwrap(), "--print-config"]);
    assert_eq!(code, 0);
    assert_eq!(ExperimentConfig::from_text(&stdout).unwrap(), c);
    let (code, _, _) = cli(&["--config", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(dir.path().join("weakbound.csv")).unwrap().lines().count(), 3);
}
