//! Microscopic mixing of decoherent subsystems.
//!
//! Space-time is a `T x X` grid, split into `L` interleaved subsystems. Each
//! subsystem carries a family of `f` states; on subsystem `a` the wave
//! functions are replaced by `Σ_k U_jk ψ_k` with a random special unitary
//! `U`. Kernel blocks within one subsystem are unchanged, blocks across
//! subsystems pick up `U` and average out over a homogenization strip.

mod amplitude;
mod dephase;
mod experiment;
mod grid;
mod kernel;

pub use amplitude::{boson_amplitude, slater_overlap, BosonAmplitude};
pub use dephase::{
    apply_subsystem_unitary, check_special_unitary, diagonal_phases, haar_special_unitary, DephasingMode,
};
pub use experiment::{
    collapse_experiment, cross_residual, fit_loglog, random_family, scaling_experiment, CollapseReport,
    CollapseRow, LogLogFit, MixingConfig, ScalingReport, ScalingRow,
};
pub use grid::{
    make_partition, measurement_product, mix_states, split_contributions, Partition, PartitionPattern,
    SpacetimeGrid, SplitNorms,
};
pub use kernel::{cross_block_norm, effective_kernel, local_cross_norm, EffectiveKernel};
