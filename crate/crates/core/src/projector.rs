//! Fermionic projectors and the causal action.
//!
//! A configuration stores the occupied states as the columns of an `N x f`
//! matrix `Psi`. With the Krein normalization `Psi^dagger S_H Psi = -I` the
//! operator `P = -Psi Psi^dagger S_H` is a Krein-symmetric projector onto the
//! span of the states. Kernel blocks are computed on demand from the state
//! blocks, `P(x,y) = -Psi_x Psi_y^dagger S`, so the dense `N x N` matrix is only
//! formed when asked for.

use std::io::Write;

use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen;
use crate::error::{Error, Result};
use crate::krein::{CMatrix, KreinSpace, WaveVector, C64};
use crate::report::{fmt_f64, write_csv};

/// Tolerance used to group eigenvalues with equal real part when sorting.
pub const SPECTRUM_SORT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Sea,
    Particle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FermionConfiguration {
    space: KreinSpace,
    states: CMatrix,
    roles: Option<Vec<ColumnRole>>,
}

impl FermionConfiguration {
    /// Wrap a state matrix. No normalization is imposed here; see
    /// [`FermionConfiguration::orthonormalized`].
    pub fn new(space: KreinSpace, states: CMatrix) -> Result<Self> {
        if states.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: states.nrows(),
            });
        }
        Ok(Self {
            space,
            states,
            roles: None,
        })
    }

    pub fn from_vectors(space: KreinSpace, vectors: &[WaveVector]) -> Result<Self> {
        let mut states = CMatrix::zeros(space.dim(), vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if *v.space() != space {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: v.space().dim(),
                });
            }
            states.set_column(j, v.amps());
        }
        Self::new(space, states)
    }

    pub fn with_roles(mut self, roles: Vec<ColumnRole>) -> Result<Self> {
        if roles.len() != self.states.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.states.ncols(),
                found: roles.len(),
            });
        }
        self.roles = Some(roles);
        Ok(self)
    }

    pub fn space(&self) -> &KreinSpace {
        &self.space
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn into_states(self) -> CMatrix {
        self.states
    }

    pub fn roles(&self) -> Option<&[ColumnRole]> {
        self.roles.as_deref()
    }

    /// Columns marked as sea states; every column when no roles are set.
    pub fn sea_columns(&self) -> Vec<usize> {
        match &self.roles {
            None => (0..self.particle_number()).collect(),
            Some(r) => r
                .iter()
                .enumerate()
                .filter(|(_, role)| **role == ColumnRole::Sea)
                .map(|(j, _)| j)
                .collect(),
        }
    }

    pub fn particle_number(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, j: usize) -> WaveVector {
        WaveVector::new(self.space, self.states.column(j).into_owned())
            .expect("column length matches the space")
    }

    /// `Psi^dagger S_H Psi`.
    pub fn gram(&self) -> CMatrix {
        gram(&self.space, &self.states)
    }

    /// Whether `Psi^dagger S_H Psi = -I` within `tol` (Frobenius).
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let f = self.particle_number();
        (self.gram() + CMatrix::identity(f, f)).norm() <= tol
    }

    pub fn orthonormalized(&self) -> Result<Self> {
        Ok(Self {
            space: self.space,
            states: orthonormalize(&self.space, &self.states)?,
            roles: self.roles.clone(),
        })
    }

    /// Right-multiply the state matrix, `Psi -> Psi C`.
    pub fn transformed(&self, c: &CMatrix) -> Result<Self> {
        if c.nrows() != self.particle_number() {
            return Err(Error::DimensionMismatch {
                expected: self.particle_number(),
                found: c.nrows(),
            });
        }
        Self::new(self.space, &self.states * c)
    }
}

pub(crate) fn gram(space: &KreinSpace, psi: &CMatrix) -> CMatrix {
    psi.adjoint() * space.apply_signature_left(psi)
}

/// Krein-orthonormalize the columns: returns `Psi (chol(-G))^{-dagger}`, whose
/// Gram matrix is `-I`. The column span is unchanged.
pub fn orthonormalize(space: &KreinSpace, psi: &CMatrix) -> Result<CMatrix> {
    if psi.nrows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: psi.nrows(),
        });
    }
    if psi.ncols() == 0 {
        return Ok(psi.clone());
    }
    let g = gram(space, psi);
    let neg = -(&g + g.adjoint()) * C64::new(0.5, 0.0);
    let min_pivot = (0..neg.nrows()).map(|i| neg[(i, i)].re).fold(f64::INFINITY, f64::min);
    let chol = Cholesky::new(neg).ok_or(Error::NotNegativeDefinite { pivot: min_pivot })?;
    let l = chol.l();
    let scale = l.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    // complex Cholesky takes square roots of negative pivots instead of failing
    let pivot = l
        .diagonal()
        .iter()
        .map(|z| if z.im.abs() > 1e-12 * z.norm() { -z.norm() } else { z.re })
        .fold(f64::INFINITY, f64::min);
    if !(pivot > 1e-13 * scale) {
        return Err(Error::NotNegativeDefinite { pivot });
    }
    let x = l
        .solve_lower_triangular(&psi.adjoint())
        .ok_or(Error::NotNegativeDefinite { pivot })?;
    Ok(x.adjoint())
}

/// The fermionic projector of a configuration, `P = -Psi Psi^dagger S_H`.
#[derive(Clone, Debug)]
pub struct FermionicProjector {
    space: KreinSpace,
    states: CMatrix,
    /// Per-point state blocks `Psi_x` (`n x f`).
    blocks: Vec<CMatrix>,
}

/// Orthonormalize the configuration and build its projector.
pub fn build_projector(config: &FermionConfiguration) -> Result<FermionicProjector> {
    let states = orthonormalize(config.space(), config.states())?;
    Ok(FermionicProjector::from_states(*config.space(), states))
}

impl FermionicProjector {
    /// Kernel operator of arbitrary states. The projector laws hold only for
    /// Krein-orthonormal states; mixing experiments use this with states
    /// normalized in the measurement product instead.
    pub fn from_states(space: KreinSpace, states: CMatrix) -> Self {
        assert_eq!(states.nrows(), space.dim(), "state rows must match the space");
        let n = space.spin_dim();
        let blocks = (0..space.points())
            .map(|x| states.rows(x * n, n).into_owned())
            .collect();
        Self {
            space,
            states,
            blocks,
        }
    }

    /// The projector of a zero-particle system.
    pub fn zero(space: KreinSpace) -> Self {
        Self::from_states(space, CMatrix::zeros(space.dim(), 0))
    }

    pub fn space(&self) -> &KreinSpace {
        &self.space
    }

    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn particle_number(&self) -> usize {
        self.states.ncols()
    }

    pub fn state_block(&self, x: usize) -> &CMatrix {
        &self.blocks[x]
    }

    /// Dense `N x N` matrix of `P`.
    pub fn matrix(&self) -> CMatrix {
        let pp = &self.states * self.states.adjoint();
        -self.space.apply_signature_right(&pp)
    }

    /// Discrete kernel `P(x,y) = E_x P E_y` as an `n x n` matrix.
    pub fn kernel(&self, x: usize, y: usize) -> Result<CMatrix> {
        self.space.check_point(x)?;
        self.space.check_point(y)?;
        Ok(self.kernel_unchecked(x, y))
    }

    pub(crate) fn kernel_unchecked(&self, x: usize, y: usize) -> CMatrix {
        let prod = &self.blocks[x] * self.blocks[y].adjoint();
        let mut k = -prod;
        let n = self.space.spin_dim();
        for j in n / 2..n {
            k.column_mut(j).neg_mut();
        }
        k
    }

    /// Closed chain `A_xy = P(x,y) P(y,x)`.
    pub fn closed_chain(&self, x: usize, y: usize) -> Result<CMatrix> {
        self.space.check_point(x)?;
        self.space.check_point(y)?;
        Ok(self.closed_chain_unchecked(x, y))
    }

    pub(crate) fn closed_chain_unchecked(&self, x: usize, y: usize) -> CMatrix {
        self.kernel_unchecked(x, y) * self.kernel_unchecked(y, x)
    }

    pub fn chain_spectrum(&self, x: usize, y: usize) -> Result<ChainSpectrum> {
        let a = self.closed_chain(x, y)?;
        Ok(chain_spectrum(&a, SPECTRUM_SORT_TOL).with_pair(x, y))
    }

    /// The causal action `S = (1/8) sum_{x,y} L[A_xy]`.
    ///
    /// `A_xy` and `A_yx` share their characteristic polynomial, so only pairs
    /// with `x <= y` are diagonalized.
    pub fn action(&self) -> f64 {
        let m = self.space.points();
        let rows: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for y in x..m {
                    let a = self.closed_chain_unchecked(x, y);
                    let l = lagrangian_of_values(&eigen::eigenvalues(&a));
                    acc += if x == y { l } else { 2.0 * l };
                }
                acc
            })
            .collect();
        rows.iter().sum::<f64>() / 8.0
    }

    /// Per-pair Lagrangians over all ordered pairs, with the action.
    pub fn action_table(&self) -> ActionTable {
        let m = self.space.points();
        let entries: Vec<PairLagrangian> = (0..m * m)
            .into_par_iter()
            .map(|k| {
                let (x, y) = (k / m, k % m);
                let spectrum =
                    chain_spectrum(&self.closed_chain_unchecked(x, y), SPECTRUM_SORT_TOL)
                        .with_pair(x, y);
                let lagrangian = lagrangian(&spectrum);
                PairLagrangian {
                    x,
                    y,
                    spectrum,
                    lagrangian,
                }
            })
            .collect();
        let action = entries.iter().map(|e| e.lagrangian).sum::<f64>() / 8.0;
        ActionTable {
            spin_dim: self.space.spin_dim(),
            entries,
            action,
        }
    }
}

/// Eigenvalues of a closed chain with the pair they came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpectrum {
    eigenvalues: Vec<C64>,
    pair: Option<(usize, usize)>,
    /// Scaled characteristic-polynomial residual of the computed roots.
    residual: f64,
}

/// All `n` eigenvalues of `a` in canonical order: by real part, then
/// imaginary part, where real parts within `tol * max|lambda|` count as equal.
pub fn chain_spectrum(a: &CMatrix, tol: f64) -> ChainSpectrum {
    let values = eigen::eigenvalues(a);
    let residual = eigen::root_residual(a, &values);
    ChainSpectrum {
        eigenvalues: canonical_order(values, tol),
        pair: None,
        residual,
    }
}

fn canonical_order(mut values: Vec<C64>, tol: f64) -> Vec<C64> {
    values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eps = tol * scale;
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end].re - values[end - 1].re <= eps {
            end += 1;
        }
        values[start..end].sort_by(|a, b| a.im.total_cmp(&b.im));
        start = end;
    }
    values
}

impl ChainSpectrum {
    pub fn from_values(values: Vec<C64>) -> Self {
        Self {
            eigenvalues: canonical_order(values, SPECTRUM_SORT_TOL),
            pair: None,
            residual: 0.0,
        }
    }

    pub fn with_pair(mut self, x: usize, y: usize) -> Self {
        self.pair = Some((x, y));
        self
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn pair(&self) -> Option<(usize, usize)> {
        self.pair
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Multiset distance: minimum over matchings of the largest deviation.
    pub fn distance(&self, other: &ChainSpectrum) -> f64 {
        multiset_distance(&self.eigenvalues, &other.eigenvalues)
    }
}

/// Bottleneck distance between two small multisets of complex numbers.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let d = p
            .iter()
            .enumerate()
            .map(|(i, &j)| (a[i] - b[j]).norm())
            .fold(0.0, f64::max);
        best = best.min(d);
    });
    best
}

fn permute(p: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// `L = sum_{i,j} (|lambda_i| - |lambda_j|)^2`.
pub fn lagrangian(spectrum: &ChainSpectrum) -> f64 {
    lagrangian_of_values(&spectrum.eigenvalues)
}

pub(crate) fn lagrangian_of_values(values: &[C64]) -> f64 {
    let moduli: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let mut sum = 0.0;
    for a in &moduli {
        for b in &moduli {
            sum += (a - b) * (a - b);
        }
    }
    sum
}

#[derive(Clone, Debug, Serialize)]
pub struct PairLagrangian {
    pub x: usize,
    pub y: usize,
    pub spectrum: ChainSpectrum,
    pub lagrangian: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ActionTable {
    pub spin_dim: usize,
    pub entries: Vec<PairLagrangian>,
    pub action: f64,
}

impl ActionTable {
    /// Columns `x, y, l1_re, l1_im, .., ln_re, ln_im, L`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec!["x".to_string(), "y".to_string()];
        for i in 1..=self.spin_dim {
            header.push(format!("l{i}_re"));
            header.push(format!("l{i}_im"));
        }
        header.push("L".to_string());
        let rows = self.entries.iter().map(|e| {
            let mut row = vec![e.x.to_string(), e.y.to_string()];
            for z in e.spectrum.eigenvalues() {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            row.push(fmt_f64(e.lagrangian));
            row
        });
        write_csv(out, &header, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::{krein_adjoint, SpinSignature};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_point() -> KreinSpace {
        KreinSpace::new(1, SpinSignature::dirac()).unwrap()
    }

    fn columns(space: KreinSpace, cols: &[&[(usize, C64)]]) -> CMatrix {
        let mut m = CMatrix::zeros(space.dim(), cols.len());
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col.iter() {
                m[(i, j)] = v;
            }
        }
        m
    }

    fn diag4(d: [f64; 4]) -> CMatrix {
        CMatrix::from_fn(4, 4, |i, j| if i == j { c(d[i], 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn orthonormalize_examples() {
        let s = one_point();
        let e3 = columns(s, &[&[(2, c(1.0, 0.0))]]);
        assert!((orthonormalize(&s, &e3).unwrap() - &e3).norm() < 1e-15);

        let two_e3 = columns(s, &[&[(2, c(2.0, 0.0))]]);
        assert!((orthonormalize(&s, &two_e3).unwrap() - &e3).norm() < 1e-15);

        let e1 = columns(s, &[&[(0, c(1.0, 0.0))]]);
        assert!(matches!(
            orthonormalize(&s, &e1),
            Err(Error::NotNegativeDefinite { .. })
        ));
    }

    #[test]
    fn projector_of_single_negative_state() {
        let s = one_point();
        let config = FermionConfiguration::new(s, columns(s, &[&[(2, c(1.0, 0.0))]])).unwrap();
        let p = build_projector(&config).unwrap();
        assert!((p.matrix() - diag4([0.0, 0.0, 1.0, 0.0])).norm() < 1e-15);
        assert!((p.kernel(0, 0).unwrap() - diag4([0.0, 0.0, 1.0, 0.0])).norm() < 1e-15);
        assert!((p.closed_chain(0, 0).unwrap() - diag4([0.0, 0.0, 1.0, 0.0])).norm() < 1e-15);
        assert!((p.action() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn projector_of_two_negative_states() {
        let s = one_point();
        let psi = columns(s, &[&[(2, c(1.0, 0.0))], &[(3, c(1.0, 0.0))]]);
        let p = build_projector(&FermionConfiguration::new(s, psi).unwrap()).unwrap();
        assert!((p.matrix() - diag4([0.0, 0.0, 1.0, 1.0])).norm() < 1e-15);
        assert!((p.action() - 1.0).abs() < 1e-12);
        assert!((p.action_table().action - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_system_has_zero_projector() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let p = build_projector(&FermionConfiguration::new(s, CMatrix::zeros(12, 0)).unwrap())
            .unwrap();
        assert_eq!(p.matrix().norm(), 0.0);
        assert_eq!(p.kernel(1, 2).unwrap().norm(), 0.0);
        assert_eq!(p.action(), 0.0);
    }

    #[test]
    fn disjoint_support_gives_vanishing_kernel() {
        let s = KreinSpace::new(2, SpinSignature::dirac()).unwrap();
        let psi = columns(s, &[&[(2, c(1.0, 0.0)), (0, c(0.3, 0.1))]]);
        let p = build_projector(&FermionConfiguration::new(s, psi).unwrap()).unwrap();
        assert_eq!(p.kernel(0, 1).unwrap().norm(), 0.0);
        assert_eq!(p.closed_chain(0, 1).unwrap().norm(), 0.0);
        assert!(p.kernel(0, 2).is_err());
    }

    #[test]
    fn kernel_reproduces_action_on_vectors() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let psi = CMatrix::from_fn(12, 2, |i, j| {
            let base = if s.sign(i) < 0.0 { 1.0 } else { 0.2 };
            c(base * ((i + 2 * j) as f64).cos(), 0.1 * (i as f64 - j as f64).sin())
        });
        let p = build_projector(&FermionConfiguration::new(s, psi).unwrap()).unwrap();
        let dense = p.matrix();
        let v = crate::krein::CVector::from_fn(12, |i, _| c(i as f64, 1.0));
        let pv = &dense * &v;
        for x in 0..3 {
            let mut acc = crate::krein::CVector::zeros(4);
            for y in 0..3 {
                acc += p.kernel(x, y).unwrap() * v.rows(4 * y, 4);
            }
            assert!((acc - pv.rows(4 * x, 4)).norm() < 1e-12);
        }
        assert!((&dense * &dense - &dense).norm() < 1e-12);
        assert!((krein_adjoint(&dense, &s).unwrap() - &dense).norm() < 1e-12);
    }

    #[test]
    fn lagrangian_examples() {
        let ones = ChainSpectrum::from_values(vec![c(1.0, 0.0); 4]);
        assert_eq!(lagrangian(&ones), 0.0);
        let spike = ChainSpectrum::from_values(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((lagrangian(&spike) - 6.0).abs() < 1e-15);
        let pairs = ChainSpectrum::from_values(vec![c(1.0, 1.0), c(1.0, -1.0), c(-1.0, 1.0), c(-1.0, -1.0)]);
        assert!(lagrangian(&pairs) < 1e-28);
    }

    #[test]
    fn chain_spectrum_examples() {
        let id = CMatrix::identity(4, 4);
        let s = chain_spectrum(&id, SPECTRUM_SORT_TOL);
        assert!(s.eigenvalues().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-14));
        let d = chain_spectrum(&diag4([2.0, 2.0, 0.5, 0.5]), SPECTRUM_SORT_TOL);
        let expect = [0.5, 0.5, 2.0, 2.0];
        for (z, e) in d.eigenvalues().iter().zip(expect) {
            assert!((z - c(e, 0.0)).norm() < 1e-14);
        }
        // a (gamma . v) + b with a = b = 2, v = (1,0,0,0): gamma^0 = diag(1,1,-1,-1)
        let m = diag4([4.0, 4.0, 0.0, 0.0]);
        let sp = chain_spectrum(&m, SPECTRUM_SORT_TOL);
        let expect = [0.0, 0.0, 4.0, 4.0];
        for (z, e) in sp.eigenvalues().iter().zip(expect) {
            assert!((z - c(e, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn canonical_order_groups_equal_real_parts() {
        let v = vec![c(1.0 + 1e-15, 1.0), c(1.0, -1.0), c(1.0 - 1e-15, 1.0), c(1.0, -1.0)];
        let s = ChainSpectrum::from_values(v);
        let ims: Vec<f64> = s.eigenvalues().iter().map(|z| z.im).collect();
        assert_eq!(ims, vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn multiset_distance_ignores_order() {
        let a = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)];
        let b = [c(2.0, 0.0), c(1.0, 0.0), c(0.0, 1.0 + 1e-3)];
        assert!((multiset_distance(&a, &b) - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn action_table_csv_layout() {
        let s = one_point();
        let config = FermionConfiguration::new(s, columns(s, &[&[(2, c(1.0, 0.0))]])).unwrap();
        let table = build_projector(&config).unwrap().action_table();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x,y,l1_re,l1_im,l2_re,l2_im,l3_re,l3_im,l4_re,l4_im,L"
        );
        assert!(lines.next().unwrap().ends_with("6.0000000000000000e0"));
    }
}
