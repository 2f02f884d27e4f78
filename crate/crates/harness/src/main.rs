use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use tracekit_harness::error::{EXIT_DIAGNOSTIC, EXIT_OK};
use tracekit_harness::{init_workers, run_task, ExperimentConfig, HarnessError};

/// Trace reconstruction experiments.
///
/// Settings are applied in order: defaults, the config file, `--set` pairs,
/// then the named flags.
#[derive(Debug, Parser)]
#[command(name = "tracekit", version)]
struct Cli {
    /// Task: simulate, means, verify-identity, distinguish, reconstruct,
    /// weakbound, hardpair or sweep.
    task: Option<String>,

    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Extra `key=value` settings, using config file keys.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// Traces per trace set.
    #[arg(long = "T")]
    traces: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// unbeaten, bma or meaninvert.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    degree: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,

    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        cfg.apply_text(&text)?;
    }
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::usage("--set", format!("expected KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    let flags = [
        ("task", &cli.task),
        ("n", &cli.n),
        ("q", &cli.q),
        ("lambda", &cli.lambda),
        ("beta", &cli.beta),
        ("T", &cli.traces),
        ("trials", &cli.trials),
        ("seed", &cli.seed),
        ("mode", &cli.mode),
        ("degree", &cli.degree),
        ("out", &cli.out),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    init_workers()?;
    let cfg = build_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(EXIT_OK);
    }
    let record = run_task(&cfg)?;
    println!("{}", record.summary);
    for p in &record.outputs {
        println!("wrote {}", p.display());
    }
    Ok(if record.diagnostic { EXIT_DIAGNOSTIC } else { EXIT_OK })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
