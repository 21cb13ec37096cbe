use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use effham::cli::{self, Experiment, ExperimentConfig};
use effham::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verb {
    Solve,
    Sweep,
    Kconv,
    Bench,
    Stability,
    Monotonicity,
}

impl From<Verb> for Experiment {
    fn from(v: Verb) -> Self {
        match v {
            Verb::Solve => Experiment::Solve,
            Verb::Sweep => Experiment::Sweep,
            Verb::Kconv => Experiment::Kconv,
            Verb::Bench => Experiment::Bench,
            Verb::Stability => Experiment::Stability,
            Verb::Monotonicity => Experiment::Monotonicity,
        }
    }
}

/// Effective Hamiltonians via entropy-penalized Hessian Riemannian flows and
/// regularized Newton iterations.
#[derive(Debug, Parser)]
#[command(name = "effham", version)]
struct Args {
    verb: Verb,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Momentum, comma-separated in 2D.
    #[arg(long = "P", allow_hyphen_values = true)]
    p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Nodes per axis.
    #[arg(long)]
    n: Option<usize>,
    /// hrf, newton or both.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<f64>,
    /// Flow end time.
    #[arg(long = "T", allow_hyphen_values = true)]
    t: Option<f64>,
}

fn build(args: &Args) -> effham::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("P", args.p.clone()),
        ("k", args.k.map(|v| v.to_string())),
        ("n", args.n.map(|v| v.to_string())),
        ("method", args.method.clone()),
        ("tau", args.tau.map(|v| v.to_string())),
        ("kappa", args.kappa.map(|v| v.to_string())),
        ("T", args.t.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    cfg.experiment = args.verb.into();
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            let e = match e {
                Error::Config(_) => e,
                other => Error::Config(other.to_string()),
            };
            return ExitCode::from(cli::error_code(&e) as u8);
        }
    };
    let result = cli::run(&cfg);
    let code = cli::exit_code(&result);
    match &result {
        Ok(o) => {
            if let Some(e) = &o.failure {
                eprintln!("error: {e}");
            }
            match serde_json::to_string(&o.summary) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(code as u8)
}
