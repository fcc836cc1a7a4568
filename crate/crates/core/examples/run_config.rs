//! Run a JSON experiment config the same way the `kreinlab` binary does.
//!
//! Usage: `cargo run --release --example run_config -- [config.json] [out-dir]`

use std::path::PathBuf;

use kreinlab::experiment::{run, ExperimentConfig};

const DEFAULT: &str = r#"{
  "kind": "classify",
  "seed": 11,
  "params": { "points": 5, "particles": 2 }
}"#;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let config = match args.first() {
        Some(path) => ExperimentConfig::load(path.as_ref()),
        None => ExperimentConfig::from_json_str(DEFAULT),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    for v in config.violations() {
        eprintln!("{v}");
    }
    let out = args.get(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("kreinlab-example"));
    match run(&config, &out) {
        Ok(m) => println!("{} -> {}: {}", m.kind, out.display(), m.summary),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
