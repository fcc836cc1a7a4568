use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use kreinlab::experiment::{run, ExperimentConfig};

/// Run a JSON-configured experiment and write its artifacts.
#[derive(Parser, Debug)]
#[command(name = "kreinlab", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Check the config and report every violation without running.
    #[arg(long)]
    validate: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KREINLAB_LOG", "warn")).init();
    let args = Args::parse();

    let mut config = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }

    let violations = config.violations();
    if args.validate {
        if violations.is_empty() {
            println!("ok");
            return ExitCode::SUCCESS;
        }
        for v in &violations {
            println!("{v}");
        }
        return ExitCode::from(1);
    }
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{}: {v}", args.config.display());
        }
        return ExitCode::from(1);
    }

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    log::info!("running {} into {}", config.params.kind(), out.display());
    match run(&config, &out) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string_pretty(&manifest.summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{} failed: {e}", config.params.kind());
            ExitCode::from(2)
        }
    }
}
