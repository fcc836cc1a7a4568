//! Numerical laboratory for fermion systems in discrete space-time.
//!
//! The crate is organised bottom-up:
//!
//! - [`krein`]: indefinite inner-product spaces, localization and Krein adjoints.
//! - [`projector`]: fermionic projectors, discrete kernels, closed chains,
//!   chain spectra, the Lagrangian and the causal action.
//! - [`causal`]: spectral classification of point pairs and causal graphs.
//! - [`minimizer`]: action minimization at fixed particle number.
//! - [`symmetry`]: outer permutation symmetries and their breaking.
//! - [`sea`]: the vacuum Dirac-sea kernel on a momentum lattice.
//! - [`mixing`]: microscopic mixing of decoherent subsystems.
//! - [`experiment`]: JSON-configured batch experiments writing CSV/JSON/DOT artifacts.
//!
//! Runnable walkthroughs live in `examples/`, one per capability.

pub mod causal;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod krein;
pub mod minimizer;
pub mod mixing;
pub mod projector;
pub mod report;
pub mod rng;
pub mod sea;
pub mod symmetry;

pub use error::{Error, Result};
pub use krein::{CMatrix, CVector, KreinSpace, SpinSignature, WaveVector, C64};
pub use projector::{ChainSpectrum, FermionConfiguration, FermionicProjector};
