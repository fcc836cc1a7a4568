use serde::Serialize;

use crate::error::{Error, Result};
use crate::krein::{CMatrix, C64};
use crate::projector::FermionConfiguration;

fn check_same_space(a: &FermionConfiguration, b: &FermionConfiguration) -> Result<()> {
    if a.space() != b.space() {
        return Err(Error::DimensionMismatch {
            expected: a.space().dim(),
            found: b.space().dim(),
        });
    }
    Ok(())
}

/// Overlap of two Slater states, `det G` with `G_ij = -<ψ^A_i | ψ^B_j>`.
///
/// The sign makes the overlap of a Krein-orthonormal state with itself one.
pub fn slater_overlap(a: &FermionConfiguration, b: &FermionConfiguration) -> Result<C64> {
    check_same_space(a, b)?;
    if a.particle_number() != b.particle_number() {
        return Err(Error::DimensionMismatch {
            expected: a.particle_number(),
            found: b.particle_number(),
        });
    }
    if a.particle_number() == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let sb = a.space().apply_signature_left(b.states());
    let g = -(a.states().adjoint() * sb);
    Ok(g.determinant())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BosonAmplitude {
    /// `det C` over the sea columns.
    pub amplitude: C64,
    /// Relative least-squares residual of `Psi_state = Psi_ref C`.
    pub residual: f64,
    /// Particle columns of the state, excluded from `C`.
    pub particle_columns: Vec<usize>,
    #[serde(skip)]
    pub particle_block: CMatrix,
}

/// Express the sea columns of `state` in the sea columns of `reference` and
/// return the determinant of the coefficient matrix.
///
/// Particle columns come from `particle_columns` when given, otherwise from
/// the roles of `state`.
pub fn boson_amplitude(
    state: &FermionConfiguration,
    reference: &FermionConfiguration,
    particle_columns: Option<&[usize]>,
    tol: f64,
) -> Result<BosonAmplitude> {
    check_same_space(state, reference)?;
    let f = state.particle_number();
    let particles: Vec<usize> = match particle_columns {
        Some(cols) => {
            if let Some(&bad) = cols.iter().find(|&&j| j >= f) {
                return Err(Error::InvalidParameter(format!(
                    "particle column {bad} out of range for {f} states"
                )));
            }
            let mut c = cols.to_vec();
            c.sort_unstable();
            c.dedup();
            c
        }
        None => {
            let sea = state.sea_columns();
            (0..f).filter(|j| !sea.contains(j)).collect()
        }
    };
    let sea: Vec<usize> = (0..f).filter(|j| !particles.contains(j)).collect();
    let ref_sea = reference.sea_columns();
    if sea.len() != ref_sea.len() {
        return Err(Error::DimensionMismatch {
            expected: ref_sea.len(),
            found: sea.len(),
        });
    }
    let target = state.states().select_columns(sea.iter());
    let basis = reference.states().select_columns(ref_sea.iter());
    let particle_block = state.states().select_columns(particles.iter());
    if sea.is_empty() {
        return Ok(BosonAmplitude {
            amplitude: C64::new(1.0, 0.0),
            residual: 0.0,
            particle_columns: particles,
            particle_block,
        });
    }
    let svd = basis.clone().svd(true, true);
    let c = svd
        .solve(&target, 1e-12 * svd.singular_values.max())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let norm = target.norm();
    let residual = if norm == 0.0 {
        0.0
    } else {
        (&basis * &c - &target).norm() / norm
    };
    if !(residual <= tol) {
        return Err(Error::NotProportional { residual });
    }
    Ok(BosonAmplitude {
        amplitude: c.determinant(),
        residual,
        particle_columns: particles,
        particle_block,
    })
}
