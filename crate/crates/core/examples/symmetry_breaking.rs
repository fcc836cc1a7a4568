//! Test every transposition of a minimizer output against its spectral
//! fingerprint, then try an exact search for one transposition.
//!
//! Usage: `cargo run --release --example symmetry_breaking -- [points] [particles] [seed]`

use kreinlab::minimizer::{minimize_action, random_feasible, MinimizerConfig};
use kreinlab::projector::build_projector;
use kreinlab::symmetry::{exact_search, sm_breaking_report, BreakingConfig, Permutation, SearchConfig};
use kreinlab::{KreinSpace, SpinSignature};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let points = args.first().copied().unwrap_or(6) as usize;
    let particles = args.get(1).copied().unwrap_or(3) as usize;
    let seed = args.get(2).copied().unwrap_or(2);

    let space = KreinSpace::new(points, SpinSignature::dirac())?;
    let cfg = MinimizerConfig {
        seed,
        max_iters: 40,
        ..MinimizerConfig::default()
    };
    let (best, _) = minimize_action(&random_feasible(space, particles, seed)?, &cfg)?;
    let p = build_projector(&best)?;

    let report = sm_breaking_report(&p, &BreakingConfig { seed, ..BreakingConfig::default() })?;
    println!(
        "{} of {} transpositions ruled out, S_m ruled out: {}",
        report.ruled_out,
        report.verdicts.len(),
        report.sm_ruled_out
    );

    let sigma = Permutation::transposition(points, 0, 1)?;
    let verdict = exact_search(&p, &sigma, &SearchConfig::default())?;
    println!("{}", serde_json::to_string_pretty(&verdict.to_json()).unwrap_or_default());
    Ok(())
}
