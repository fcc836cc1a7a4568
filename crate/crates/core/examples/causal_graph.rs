//! Classify every point pair of a minimized system and print the DOT graph.
//!
//! Usage: `cargo run --release --example causal_graph -- [points] [particles] [seed]`

use kreinlab::causal::{causal_graph, CausalLabel, CausalTolerances};
use kreinlab::minimizer::{minimize_action, random_feasible, MinimizerConfig};
use kreinlab::projector::build_projector;
use kreinlab::{KreinSpace, SpinSignature};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let points = args.first().copied().unwrap_or(4) as usize;
    let particles = args.get(1).copied().unwrap_or(2) as usize;
    let seed = args.get(2).copied().unwrap_or(3);

    let space = KreinSpace::new(points, SpinSignature::dirac())?;
    let cfg = MinimizerConfig {
        seed,
        max_iters: 60,
        ..MinimizerConfig::default()
    };
    let (best, _) = minimize_action(&random_feasible(space, particles, seed)?, &cfg)?;
    let graph = causal_graph(&build_projector(&best)?, &CausalTolerances::default());

    for label in [CausalLabel::Timelike, CausalLabel::Spacelike, CausalLabel::Lightlike] {
        println!("{label}: {}", graph.count(label));
    }
    print!("{}", graph.to_dot());
    Ok(())
}
