use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::Partition;
use crate::error::{Error, Result};
use crate::krein::{CMatrix, C64};
use crate::projector::FermionConfiguration;
use crate::rng::complex_gaussian_matrix;

const DET_TOL: f64 = 1e-8;
const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DephasingMode {
    DiagonalPhases,
    HaarSpecialUnitary,
}

impl DephasingMode {
    pub fn sample<R: Rng + ?Sized>(&self, f: usize, rng: &mut R) -> CMatrix {
        match self {
            DephasingMode::DiagonalPhases => diagonal_phases(f, rng),
            DephasingMode::HaarSpecialUnitary => haar_special_unitary(f, rng),
        }
    }
}

/// Haar-distributed element of `SU(f)`: QR of a complex Ginibre matrix with
/// the phases of `R` moved into `Q`, then divided by an `f`-th root of the
/// determinant.
pub fn haar_special_unitary<R: Rng + ?Sized>(f: usize, rng: &mut R) -> CMatrix {
    let z = complex_gaussian_matrix(f, f, rng);
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..f {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    let det = q.determinant();
    let root = C64::from_polar(1.0, -det.arg() / f as f64);
    q * root
}

/// `diag(e^{iφ_1}, .., e^{iφ_f})` with uniform phases and `φ_f` fixed by
/// `Σ φ_j = 0`.
pub fn diagonal_phases<R: Rng + ?Sized>(f: usize, rng: &mut R) -> CMatrix {
    let mut phases: Vec<f64> = (0..f.saturating_sub(1))
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    phases.push(-phases.iter().sum::<f64>());
    let mut u = CMatrix::zeros(f, f);
    for (j, phi) in phases.into_iter().enumerate() {
        u[(j, j)] = C64::from_polar(1.0, phi);
    }
    u
}

pub fn check_special_unitary(u: &CMatrix) -> Result<()> {
    if !u.is_square() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            found: u.ncols(),
        });
    }
    let f = u.nrows();
    let unitarity = (u.adjoint() * u - CMatrix::identity(f, f)).norm();
    let det_defect = (u.determinant() - C64::new(1.0, 0.0)).norm();
    if unitarity > UNITARITY_TOL || det_defect > DET_TOL {
        return Err(Error::NotSpecialUnitary {
            unitarity,
            det_defect,
        });
    }
    Ok(())
}

/// Mix the states on subsystem `a`: `ψ_j -> Σ_k U_jk ψ_k` at the points of
/// `M_a`, untouched elsewhere.
pub fn apply_subsystem_unitary(
    config: &FermionConfiguration,
    u: &CMatrix,
    a: usize,
    part: &Partition,
) -> Result<FermionConfiguration> {
    check_special_unitary(u)?;
    apply_unchecked(config, u, a, part)
}

pub(crate) fn apply_unchecked(
    config: &FermionConfiguration,
    u: &CMatrix,
    a: usize,
    part: &Partition,
) -> Result<FermionConfiguration> {
    let space = *config.space();
    if space != part.grid().space() {
        return Err(Error::DimensionMismatch {
            expected: part.grid().space().dim(),
            found: space.dim(),
        });
    }
    if u.nrows() != config.particle_number() {
        return Err(Error::DimensionMismatch {
            expected: config.particle_number(),
            found: u.nrows(),
        });
    }
    part.check_subsystem(a)?;
    let members = part.members(a);
    let n = space.spin_dim();
    let rows: Vec<usize> = members.iter().flat_map(|&p| p * n..(p + 1) * n).collect();
    let block = config.states().select_rows(rows.iter());
    let mixed = block * u.transpose();
    let mut states = config.states().clone();
    for (k, &r) in rows.iter().enumerate() {
        states.set_row(r, &mixed.row(k));
    }
    let out = FermionConfiguration::new(space, states)?;
    match config.roles() {
        Some(roles) => out.with_roles(roles.to_vec()),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::SpinSignature;
    use crate::mixing::grid::{make_partition, PartitionPattern, SpacetimeGrid};
    use crate::projector::FermionicProjector;
    use crate::rng::stream;

    #[test]
    fn haar_samples_are_special_unitary() {
        let mut rng = stream(4, 0);
        for f in [1, 2, 5, 64] {
            let u = haar_special_unitary(f, &mut rng);
            check_special_unitary(&u).unwrap();
        }
        let d = diagonal_phases(7, &mut rng);
        check_special_unitary(&d).unwrap();
    }

    #[test]
    fn rejects_non_special() {
        let mut u = CMatrix::identity(3, 3);
        u[(0, 0)] = C64::new(0.0, 1.0);
        assert!(matches!(check_special_unitary(&u), Err(Error::NotSpecialUnitary { .. })));
        let scaled = CMatrix::identity(2, 2) * C64::new(1.1, 0.0);
        assert!(check_special_unitary(&scaled).is_err());
    }

    fn setup() -> (Partition, FermionConfiguration) {
        let g = SpacetimeGrid::new(4, 2, SpinSignature::dirac()).unwrap();
        let part = make_partition(g, 2, PartitionPattern::TimeInterleave).unwrap();
        let mut rng = stream(5, 0);
        let psi = complex_gaussian_matrix(g.space().dim(), 3, &mut rng);
        (part, FermionConfiguration::new(g.space(), psi).unwrap())
    }

    #[test]
    fn identity_leaves_configuration_unchanged() {
        let (part, cfg) = setup();
        let out = apply_subsystem_unitary(&cfg, &CMatrix::identity(3, 3), 1, &part).unwrap();
        assert_eq!(out, cfg);
    }

    #[test]
    fn diagonal_phases_multiply_columns_on_the_subsystem() {
        let (part, cfg) = setup();
        let mut rng = stream(6, 0);
        let d = diagonal_phases(3, &mut rng);
        let out = apply_subsystem_unitary(&cfg, &d, 1, &part).unwrap();
        let space = cfg.space();
        for p in 0..space.points() {
            for i in space.block(p) {
                for j in 0..3 {
                    let expect = if part.subsystem(p) == 1 {
                        cfg.states()[(i, j)] * d[(j, j)]
                    } else {
                        cfg.states()[(i, j)]
                    };
                    assert!((out.states()[(i, j)] - expect).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn same_subsystem_kernels_are_invariant() {
        let (part, cfg) = setup();
        let mut rng = stream(7, 0);
        let u = haar_special_unitary(3, &mut rng);
        let out = apply_subsystem_unitary(&cfg, &u, 1, &part).unwrap();
        let p0 = FermionicProjector::from_states(*cfg.space(), cfg.states().clone());
        let p1 = FermionicProjector::from_states(*out.space(), out.states().clone());
        let members = part.members(1);
        for &x in &members {
            for &y in &members {
                let d = (p0.kernel(x, y).unwrap() - p1.kernel(x, y).unwrap()).norm();
                assert!(d < 1e-12);
            }
        }
        // cross blocks do change
        let x = part.members(0)[0];
        let y = members[0];
        assert!((p0.kernel(x, y).unwrap() - p1.kernel(x, y).unwrap()).norm() > 1e-6);
    }
}
