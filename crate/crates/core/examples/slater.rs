//! Slater overlaps and boson amplitudes under mixing of the occupied states.
//!
//! Usage: `cargo run --release --example slater -- [particles] [seed]`

use kreinlab::minimizer::random_feasible;
use kreinlab::mixing::{boson_amplitude, diagonal_phases, haar_special_unitary, slater_overlap};
use kreinlab::rng::stream;
use kreinlab::{CMatrix, KreinSpace, SpinSignature, C64};

fn main() -> kreinlab::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let f = args.first().copied().unwrap_or(4) as usize;
    let seed = args.get(1).copied().unwrap_or(0);

    let space = KreinSpace::new(f, SpinSignature::dirac())?;
    let psi = random_feasible(space, f, seed)?;
    let mut rng = stream(seed, 1);

    let u = haar_special_unitary(f, &mut rng);
    println!("<Psi|Psi>     = {:.12}", slater_overlap(&psi, &psi)?);
    println!("<Psi|Psi U>   = {:.12}", slater_overlap(&psi, &psi.transformed(&u)?)?);

    let d = diagonal_phases(f, &mut rng);
    println!("<Psi|Psi D>   = {:.12}", slater_overlap(&psi, &psi.transformed(&d)?)?);

    let mut c = CMatrix::identity(f, f);
    c[(0, 0)] = C64::new(0.5, 0.5);
    let amp = boson_amplitude(&psi.transformed(&c)?, &psi, None, 1e-10)?;
    println!("amplitude     = {:.12} (residual {:.1e})", amp.amplitude, amp.residual);
    Ok(())
}
