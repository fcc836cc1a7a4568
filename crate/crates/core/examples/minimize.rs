//! Minimize the causal action for a small system and print the trace.
//!
//! Usage: `cargo run --release --example minimize -- [points] [particles] [seed]`

use std::time::Instant;

use kreinlab::minimizer::{minimize_action, random_feasible, MinimizerConfig};
use kreinlab::projector::build_projector;
use kreinlab::{KreinSpace, SpinSignature};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let points = args.first().copied().unwrap_or(4) as usize;
    let particles = args.get(1).copied().unwrap_or(2) as usize;
    let seed = args.get(2).copied().unwrap_or(7);

    let space = KreinSpace::new(points, SpinSignature::dirac())?;
    let start = random_feasible(space, particles, seed)?;
    let cfg = MinimizerConfig {
        seed,
        ..MinimizerConfig::default()
    };
    let clock = Instant::now();
    let (best, trace) = minimize_action(&start, &cfg)?;
    let p = build_projector(&best)?;

    println!("m = {points}, f = {particles}, seed = {seed}");
    println!("initial action {:.10}", trace.initial_action().unwrap_or(f64::NAN));
    println!("final action   {:.10}", p.action());
    println!("accepted steps {}", trace.entries.len() - 1);
    println!("elapsed        {:.2?}", clock.elapsed());
    Ok(())
}
