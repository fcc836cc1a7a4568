//! Suppression of the cross-subsystem kernel under random dephasing as a
//! function of the particle number.
//!
//! Usage: `cargo run --release --example mixing_scaling -- [trials] [seed]`

use kreinlab::mixing::{scaling_experiment, MixingConfig};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let cfg = MixingConfig {
        trials: args.first().copied().unwrap_or(20) as usize,
        seed: args.get(1).copied().unwrap_or(0),
        strips: 32,
        ..MixingConfig::default()
    };
    let report = scaling_experiment(&cfg, &[8, 16, 32, 64, 128])?;
    report.write_csv(std::io::stdout().lock())?;
    println!(
        "slope {:.3} (95% CI [{:.3}, {:.3}])",
        report.fit.slope, report.fit.ci_low, report.fit.ci_high
    );
    Ok(())
}
