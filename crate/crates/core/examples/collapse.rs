//! Cross-subsystem action for a growing number of dephased subsystems.
//!
//! Usage: `cargo run --release --example collapse -- [trials] [seed]`

use kreinlab::mixing::{collapse_experiment, MixingConfig};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = MixingConfig {
        trials: args.first().copied().unwrap_or(20) as usize,
        seed: args.get(1).copied().unwrap_or(0),
        strips: 4,
        ..MixingConfig::default()
    };
    let report = collapse_experiment(&cfg, &[1, 2, 4, 8], 8)?;
    report.write_csv(std::io::stdout().lock())?;
    println!("monotone: {}", report.monotone);
    if let Some(p) = report.exponent() {
        println!("R ~ L^{p:.3}");
    }
    Ok(())
}
