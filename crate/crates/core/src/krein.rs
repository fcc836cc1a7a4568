//! Indefinite inner-product spaces built from a finite set of space-time points.
//!
//! Every point carries a spin space of dimension `n` (2 or 4) with the split
//! signature `diag(+1, .., +1, -1, .., -1)`. The total space is the direct sum
//! of the spin spaces; amplitudes are stored point-major, so the spin
//! components of point `x` occupy indices `x*n .. (x+1)*n`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Spin dimension together with its signature `(n/2, n/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct SpinSignature {
    dim: usize,
}

impl SpinSignature {
    pub fn new(dim: usize) -> Result<Self> {
        match dim {
            2 | 4 => Ok(Self { dim }),
            other => Err(Error::UnsupportedSpinDimension(other)),
        }
    }

    /// Four-component spinors, signature `diag(1, 1, -1, -1)`.
    pub fn dirac() -> Self {
        Self { dim: 4 }
    }

    /// Two-component spinors, signature `diag(1, -1)`.
    pub fn two_component() -> Self {
        Self { dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonal entry `i` of the signature matrix.
    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if i < self.dim / 2 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i == j {
                C64::new(self.sign(i), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

impl TryFrom<usize> for SpinSignature {
    type Error = Error;

    fn try_from(dim: usize) -> Result<Self> {
        Self::new(dim)
    }
}

impl From<SpinSignature> for usize {
    fn from(sig: SpinSignature) -> usize {
        sig.dim
    }
}

/// Discrete space-time: `points` spin spaces glued into one Krein space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KreinSpace {
    points: usize,
    spin: SpinSignature,
}

impl KreinSpace {
    pub fn new(points: usize, spin: SpinSignature) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidParameter(
                "a discrete space-time needs at least one point".into(),
            ));
        }
        Ok(Self { points, spin })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spin(&self) -> SpinSignature {
        self.spin
    }

    pub fn spin_dim(&self) -> usize {
        self.spin.dim
    }

    /// Total dimension `n * m`.
    pub fn dim(&self) -> usize {
        self.points * self.spin.dim
    }

    /// Dimension of a maximal negative definite subspace.
    pub fn negative_cone_dim(&self) -> usize {
        self.dim() / 2
    }

    /// Signature entry for a global coordinate index.
    #[inline]
    pub fn sign(&self, index: usize) -> f64 {
        self.spin.sign(index % self.spin.dim)
    }

    pub fn check_point(&self, x: usize) -> Result<()> {
        if x < self.points {
            Ok(())
        } else {
            Err(Error::PointOutOfRange {
                index: x,
                points: self.points,
            })
        }
    }

    /// Coordinate range of the spin space at `x`.
    pub fn block(&self, x: usize) -> Range<usize> {
        let n = self.spin.dim;
        x * n..(x + 1) * n
    }

    /// The block-diagonal signature matrix `S_H`.
    pub fn signature_matrix(&self) -> CMatrix {
        let dim = self.dim();
        CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(self.sign(i), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// The space-time projector `E_x` as a full matrix.
    pub fn point_projector(&self, x: usize) -> Result<CMatrix> {
        self.check_point(x)?;
        let range = self.block(x);
        let dim = self.dim();
        Ok(CMatrix::from_fn(dim, dim, |i, j| {
            if i == j && range.contains(&i) {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `S_H * A` without forming `S_H`.
    pub fn apply_signature_left(&self, a: &CMatrix) -> CMatrix {
        let mut out = a.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            if self.sign(i) < 0.0 {
                row.neg_mut();
            }
        }
        out
    }

    /// `A * S_H` without forming `S_H`.
    pub fn apply_signature_right(&self, a: &CMatrix) -> CMatrix {
        let mut out = a.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            if self.sign(j) < 0.0 {
                col.neg_mut();
            }
        }
        out
    }

    fn check_square(&self, a: &CMatrix) -> Result<()> {
        let dim = self.dim();
        if a.nrows() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.nrows(),
            });
        }
        if a.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: a.ncols(),
            });
        }
        Ok(())
    }
}

/// A vector of the Krein space together with the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveVector {
    space: KreinSpace,
    amps: CVector,
}

impl WaveVector {
    pub fn new(space: KreinSpace, amps: CVector) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amps.len(),
            });
        }
        Ok(Self { space, amps })
    }

    pub fn zeros(space: KreinSpace) -> Self {
        Self {
            space,
            amps: CVector::zeros(space.dim()),
        }
    }

    /// Unit vector along global coordinate `index`.
    pub fn basis(space: KreinSpace, index: usize) -> Result<Self> {
        if index >= space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: index + 1,
            });
        }
        let mut v = Self::zeros(space);
        v.amps[index] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn space(&self) -> &KreinSpace {
        &self.space
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amps(self) -> CVector {
        self.amps
    }

    /// The wave function at `x`, i.e. `E_x psi` read as a spinor.
    pub fn localize(&self, x: usize) -> Result<CVector> {
        self.space.check_point(x)?;
        Ok(self.amps.rows_range(self.space.block(x)).into_owned())
    }

    /// Reassemble a vector from its per-point spinors.
    pub fn from_spinors(space: KreinSpace, spinors: &[CVector]) -> Result<Self> {
        if spinors.len() != space.points() {
            return Err(Error::DimensionMismatch {
                expected: space.points(),
                found: spinors.len(),
            });
        }
        let n = space.spin_dim();
        let mut amps = CVector::zeros(space.dim());
        for (x, s) in spinors.iter().enumerate() {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.len(),
                });
            }
            amps.rows_range_mut(space.block(x)).copy_from(s);
        }
        Ok(Self { space, amps })
    }
}

/// Spin scalar product `<psi|phi> = sum_x psi(x)^dagger S phi(x)`.
pub fn inner_product(psi: &WaveVector, phi: &WaveVector) -> Result<C64> {
    if psi.space != phi.space {
        return Err(Error::DimensionMismatch {
            expected: psi.space.dim(),
            found: phi.space.dim(),
        });
    }
    let space = psi.space;
    Ok(psi
        .amps
        .iter()
        .zip(phi.amps.iter())
        .enumerate()
        .map(|(i, (a, b))| a.conj() * b * space.sign(i))
        .sum())
}

/// Krein adjoint `A* = S_H A^dagger S_H`.
pub fn krein_adjoint(a: &CMatrix, space: &KreinSpace) -> Result<CMatrix> {
    space.check_square(a)?;
    let dim = space.dim();
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        a[(j, i)].conj() * (space.sign(i) * space.sign(j))
    }))
}

/// `||A* - A||_F <= tol (1 + ||A||_F)`.
pub fn is_symmetric(a: &CMatrix, space: &KreinSpace, tol: f64) -> Result<bool> {
    let adj = krein_adjoint(a, space)?;
    Ok((adj - a).norm() <= tol * (1.0 + a.norm()))
}
