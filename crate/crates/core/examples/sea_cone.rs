//! Classify the Dirac-sea chain on a grid of separations and compare with
//! the Minkowski light cone. Writes the heatmap CSV to stdout.
//!
//! Usage: `cargo run --release --example sea_cone -- [nt] [nr]`

use kreinlab::causal::CausalTolerances;
use kreinlab::sea::{cone_agreement, SeaParams, SeparationGrid};

fn main() -> kreinlab::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let grid = SeparationGrid {
        nt: args.first().copied().unwrap_or(20),
        nr: args.get(1).copied().unwrap_or(20),
        ..SeparationGrid::default()
    };
    let report = cone_agreement(&SeaParams::default(), &grid, &CausalTolerances::default(), 0.5)?;
    eprintln!(
        "agreement {:.4} over {} separations ({} inside the margin)",
        report.agreement,
        report.samples.len(),
        report.excluded
    );
    report.write_heatmap(std::io::stdout().lock())
}
