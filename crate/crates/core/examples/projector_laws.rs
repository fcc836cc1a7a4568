//! Build a fermionic projector from random states and check its algebra.
//!
//! Usage: `cargo run --release --example projector_laws -- [points] [particles] [seed]`

use kreinlab::krein::krein_adjoint;
use kreinlab::minimizer::random_feasible;
use kreinlab::projector::build_projector;
use kreinlab::{KreinSpace, SpinSignature};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let points = args.first().copied().unwrap_or(3) as usize;
    let particles = args.get(1).copied().unwrap_or(2) as usize;
    let seed = args.get(2).copied().unwrap_or(1);

    let space = KreinSpace::new(points, SpinSignature::dirac())?;
    let config = random_feasible(space, particles, seed)?;
    println!("orthonormal: {}", config.is_orthonormal(1e-12));

    let p = build_projector(&config)?;
    let m = p.matrix();
    println!("|P^2 - P|  = {:.3e}", (&m * &m - &m).norm());
    println!("|P* - P|   = {:.3e}", (krein_adjoint(&m, &space)? - &m).norm());

    for x in 0..points {
        for y in x..points {
            let s = p.chain_spectrum(x, y)?;
            let values: Vec<String> = s.eigenvalues().iter().map(|z| format!("{:.4}{:+.4}i", z.re, z.im)).collect();
            println!("A({x},{y}): [{}]", values.join(", "));
        }
    }
    println!("action = {:.12}", p.action());
    Ok(())
}
