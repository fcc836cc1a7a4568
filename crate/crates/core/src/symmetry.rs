//! Outer permutation symmetries.
//!
//! A permutation `sigma` of the space-time points is an outer symmetry when a
//! Krein-unitary `U` maps each spin space `S_x` onto `S_sigma(x)` and commutes
//! with the projector. Writing `u_x` for the block of `U` from `S_x` to
//! `S_sigma(x)`, the conditions read
//!
//! ```text
//! u_x P(x,y) = P(sigma x, sigma y) u_y      for all x, y
//! u_x^dagger S u_x = S                      for all x
//! ```
//!
//! The first set forces `A_{sigma x, sigma y} = u_x A_xy u_x^{-1}`, so chain
//! spectra must be permuted along with the points. [`necessary_check`] tests
//! only that; [`exact_search`] solves the linear conditions and then looks for a
//! Krein-unitary solution.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::krein::{CMatrix, C64};
use crate::projector::{chain_spectrum, ChainSpectrum, FermionicProjector, SPECTRUM_SORT_TOL};
use crate::rng::{complex_gaussian_matrix, stream};

/// A bijection of `{0, .., m-1}`, stored as its image list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidParameter(format!(
                    "{images:?} is not a permutation"
                )));
            }
            seen[i] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(m: usize) -> Self {
        Self((0..m).collect())
    }

    pub fn transposition(m: usize, i: usize, j: usize) -> Result<Self> {
        if i >= m || j >= m {
            return Err(Error::PointOutOfRange {
                index: i.max(j),
                points: m,
            });
        }
        let mut images: Vec<usize> = (0..m).collect();
        images.swap(i, j);
        Ok(Self(images))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self ∘ other`, i.e. `x -> self(other(x))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(Self(other.0.iter().map(|&x| self.0[x]).collect()))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (x, &y) in self.0.iter().enumerate() {
            inv[y] = x;
        }
        Self(inv)
    }

    /// One-line notation with 1-based labels, e.g. `[2 1 3]`.
    pub fn one_line(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        format!("[{}]", parts.join(" "))
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Self::new(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// Canonically sorted chain spectra of every unordered pair, self-pairs included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralFingerprint {
    points: usize,
    spectra: Vec<ChainSpectrum>,
}

impl SpectralFingerprint {
    fn index(&self, x: usize, y: usize) -> usize {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        // row a of the upper triangle holds m - a entries
        a * self.points - a * a.saturating_sub(1) / 2 + (b - a)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Spectrum of `A_xy`; `A_xy` and `A_yx` share it.
    pub fn get(&self, x: usize, y: usize) -> &ChainSpectrum {
        &self.spectra[self.index(x, y)]
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }
}

pub fn fingerprint(p: &FermionicProjector, tol: f64) -> SpectralFingerprint {
    let m = p.space().points();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|x| (x..m).map(move |y| (x, y))).collect();
    let spectra = pairs
        .par_iter()
        .map(|&(x, y)| chain_spectrum(&p.closed_chain_unchecked(x, y), tol).with_pair(x, y))
        .collect();
    let fp = SpectralFingerprint { points: m, spectra };
    debug_assert!(pairs
        .iter()
        .all(|&(x, y)| fp.get(x, y).pair() == Some((x, y))));
    fp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    RuledOut,
    ConsistentNecessary,
    Verified,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryVerdict {
    pub permutation: Permutation,
    pub verdict: Verdict,
    /// Pair `(x, y)` whose spectrum is not matched by `(sigma x, sigma y)`.
    pub witness_pair: Option<(usize, usize)>,
    /// Largest relative spectral mismatch over all pairs.
    pub spectral_mismatch: f64,
    /// Blocks `u_x : S_x -> S_sigma(x)` when verified.
    pub blocks: Option<Vec<CMatrix>>,
    /// Residuals of the intertwining and Krein-unitarity conditions, when a
    /// candidate was constructed.
    pub intertwining_residual: Option<f64>,
    pub unitarity_residual: Option<f64>,
    pub note: Option<String>,
}

impl SymmetryVerdict {
    fn necessary(permutation: Permutation, witness: Option<(usize, usize)>, mismatch: f64) -> Self {
        Self {
            permutation,
            verdict: if witness.is_some() {
                Verdict::RuledOut
            } else {
                Verdict::ConsistentNecessary
            },
            witness_pair: witness,
            spectral_mismatch: mismatch,
            blocks: None,
            intertwining_residual: None,
            unitarity_residual: None,
            note: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let blocks = self.blocks.as_ref().map(|bs| {
            bs.iter()
                .map(|b| {
                    (0..b.nrows())
                        .map(|i| (0..b.ncols()).map(|j| [b[(i, j)].re, b[(i, j)].im]).collect())
                        .collect::<Vec<Vec<[f64; 2]>>>()
                })
                .collect::<Vec<_>>()
        });
        json!({
            "permutation": self.permutation.one_line(),
            "verdict": self.verdict,
            "witness_pair": self.witness_pair.map(|(x, y)| [x + 1, y + 1]),
            "spectral_mismatch": self.spectral_mismatch,
            "intertwining_residual": self.intertwining_residual,
            "unitarity_residual": self.unitarity_residual,
            "blocks": blocks,
            "note": self.note,
        })
    }
}

fn relative_mismatch(a: &ChainSpectrum, b: &ChainSpectrum) -> f64 {
    let scale = 1.0 + a.max_modulus().max(b.max_modulus());
    a.distance(b) / scale
}

/// Compare fingerprints: `spec(A_xy)` against `spec(A_{sigma x, sigma y})` for
/// every pair. The worst pair beyond `tol` is the witness.
pub fn check_fingerprint(fp: &SpectralFingerprint, sigma: &Permutation, tol: f64) -> Result<SymmetryVerdict> {
    let m = fp.points();
    if sigma.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: sigma.len(),
        });
    }
    let mut worst = (0.0, None);
    for x in 0..m {
        for y in x..m {
            let d = relative_mismatch(fp.get(x, y), fp.get(sigma.apply(x), sigma.apply(y)));
            if d > worst.0 {
                worst = (d, Some((x, y)));
            }
        }
    }
    let witness = if worst.0 > tol { worst.1 } else { None };
    Ok(SymmetryVerdict::necessary(sigma.clone(), witness, worst.0))
}

pub fn necessary_check(p: &FermionicProjector, sigma: &Permutation, tol: f64) -> Result<SymmetryVerdict> {
    check_fingerprint(&fingerprint(p, SPECTRUM_SORT_TOL), sigma, tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Threshold for spectral mismatch and for the final residuals.
    pub tol: f64,
    /// Singular values below `null_tol * sigma_max` span the solution space.
    pub null_tol: f64,
    pub max_points: usize,
    pub polish_iters: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            null_tol: 1e-9,
            max_points: 6,
            polish_iters: 200,
            seed: 0,
        }
    }
}

/// Residuals of candidate blocks: `(intertwining, unitarity)`.
///
/// Intertwining is `max ||u_x P(x,y) - P(sigma x, sigma y) u_y||` relative to
/// the largest kernel block; unitarity is `max ||u_x^dagger S u_x - S||`.
pub fn verify_blocks(p: &FermionicProjector, sigma: &Permutation, blocks: &[CMatrix]) -> Result<(f64, f64)> {
    let m = p.space().points();
    let n = p.space().spin_dim();
    if sigma.len() != m || blocks.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: blocks.len(),
        });
    }
    if let Some(b) = blocks.iter().find(|b| b.shape() != (n, n)) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    let s = p.space().spin().matrix();
    let mut scale: f64 = 0.0;
    let mut inter: f64 = 0.0;
    for x in 0..m {
        for y in 0..m {
            let k = p.kernel_unchecked(x, y);
            scale = scale.max(k.norm());
            let lhs = &blocks[x] * k;
            let rhs = p.kernel_unchecked(sigma.apply(x), sigma.apply(y)) * &blocks[y];
            inter = inter.max((lhs - rhs).norm());
        }
    }
    let unit = blocks
        .iter()
        .map(|u| (u.adjoint() * &s * u - &s).norm())
        .fold(0.0, f64::max);
    let inter = if scale > 0.0 { inter / scale } else { inter };
    Ok((inter, unit))
}

/// Blocks of `U_sigma U_tau`: `u_x = u^sigma_{tau(x)} u^tau_x`.
pub fn compose(
    sigma: &Permutation,
    sigma_blocks: &[CMatrix],
    tau: &Permutation,
    tau_blocks: &[CMatrix],
) -> Result<(Permutation, Vec<CMatrix>)> {
    let composite = sigma.compose(tau)?;
    let blocks = (0..tau.len())
        .map(|x| &sigma_blocks[tau.apply(x)] * &tau_blocks[x])
        .collect();
    Ok((composite, blocks))
}

/// Search for Krein-unitary blocks realizing `sigma`.
pub fn exact_search(p: &FermionicProjector, sigma: &Permutation, cfg: &SearchConfig) -> Result<SymmetryVerdict> {
    let m = p.space().points();
    if m > cfg.max_points {
        return Err(Error::InvalidParameter(format!(
            "exact search is limited to {} points, got {m}",
            cfg.max_points
        )));
    }
    let mut verdict = necessary_check(p, sigma, cfg.tol)?;
    if verdict.verdict == Verdict::RuledOut {
        return Ok(verdict);
    }
    let n = p.space().spin_dim();

    let identity: Vec<CMatrix> = vec![CMatrix::identity(n, n); m];
    let (inter, unit) = verify_blocks(p, sigma, &identity)?;
    if inter <= cfg.tol && unit <= cfg.tol {
        return Ok(verified(verdict, identity, inter, unit));
    }

    let scale = (0..m)
        .flat_map(|x| (0..m).map(move |y| (x, y)))
        .map(|(x, y)| p.kernel_unchecked(x, y).norm())
        .fold(0.0, f64::max);
    if scale < 1e-12 {
        return Err(Error::InconclusivePropagation(
            "all kernel blocks vanish, the conditions do not constrain U".into(),
        ));
    }

    let basis = solution_space(p, sigma, cfg.null_tol)?;
    if basis.ncols() == 0 {
        verdict.verdict = Verdict::RuledOut;
        verdict.note = Some("intertwining equations have only the trivial solution".into());
        return Ok(verdict);
    }

    let mut rng = stream(cfg.seed, 0);
    let mut starts: Vec<DVector<C64>> = Vec::new();
    let id_vec = blocks_to_vec(&identity);
    starts.push(&basis * (basis.adjoint() * &id_vec));
    for k in 0..basis.ncols() {
        starts.push(basis.column(k).into_owned());
    }
    for _ in 0..4 {
        let c = complex_gaussian_matrix(basis.ncols(), 1, &mut rng);
        starts.push(&basis * c.column(0));
    }

    let mut best: Option<(Vec<CMatrix>, f64, f64)> = None;
    for start in starts {
        let Some(blocks) = polish(p, &basis, start, m, n, cfg.polish_iters) else {
            continue;
        };
        let (inter, unit) = verify_blocks(p, sigma, &blocks)?;
        let better = best
            .as_ref()
            .is_none_or(|(_, i, u)| inter.max(unit) < i.max(*u));
        if better {
            best = Some((blocks, inter, unit));
        }
        if inter <= cfg.tol && unit <= cfg.tol {
            break;
        }
    }
    match best {
        Some((blocks, inter, unit)) if inter <= cfg.tol && unit <= cfg.tol => {
            Ok(verified(verdict, blocks, inter, unit))
        }
        Some((_, inter, unit)) => {
            verdict.intertwining_residual = Some(inter);
            verdict.unitarity_residual = Some(unit);
            verdict.note = Some(format!(
                "{}-dimensional solution space contains no Krein-unitary point within tolerance",
                basis.ncols()
            ));
            if basis.ncols() == 1 {
                // a one-dimensional family is fixed up to scale, so failure is decisive
                verdict.verdict = Verdict::RuledOut;
            }
            Ok(verdict)
        }
        None => {
            verdict.note = Some("no invertible candidate in the solution space".into());
            if basis.ncols() == 1 {
                verdict.verdict = Verdict::RuledOut;
            }
            Ok(verdict)
        }
    }
}

fn verified(mut v: SymmetryVerdict, blocks: Vec<CMatrix>, inter: f64, unit: f64) -> SymmetryVerdict {
    v.verdict = Verdict::Verified;
    v.blocks = Some(blocks);
    v.intertwining_residual = Some(inter);
    v.unitarity_residual = Some(unit);
    v
}

fn blocks_to_vec(blocks: &[CMatrix]) -> DVector<C64> {
    DVector::from_iterator(
        blocks.iter().map(|b| b.len()).sum(),
        blocks.iter().flat_map(|b| b.iter().copied()),
    )
}

fn vec_to_blocks(v: &DVector<C64>, m: usize, n: usize) -> Vec<CMatrix> {
    (0..m)
        .map(|x| CMatrix::from_column_slice(n, n, &v.as_slice()[x * n * n..(x + 1) * n * n]))
        .collect()
}

/// Orthonormal basis of `{u : u_x P(x,y) - P(sigma x, sigma y) u_y = 0}` in
/// the column-major stacking of the blocks.
fn solution_space(p: &FermionicProjector, sigma: &Permutation, null_tol: f64) -> Result<CMatrix> {
    let m = p.space().points();
    let n = p.space().spin_dim();
    let nn = n * n;
    let mut system = CMatrix::zeros(m * m * nn, m * nn);
    for x in 0..m {
        for y in 0..m {
            let k = p.kernel_unchecked(x, y);
            let q = p.kernel_unchecked(sigma.apply(x), sigma.apply(y));
            let row0 = (x * m + y) * nn;
            // vec(u K) = (K^T ⊗ I) vec(u)
            for a in 0..n {
                for b in 0..n {
                    for i in 0..n {
                        system[(row0 + b * n + i, x * nn + a * n + i)] += k[(a, b)];
                    }
                }
            }
            // vec(Q u) = (I ⊗ Q) vec(u)
            for b in 0..n {
                for i in 0..n {
                    for a in 0..n {
                        system[(row0 + b * n + i, y * nn + b * n + a)] -= q[(i, a)];
                    }
                }
            }
        }
    }
    let svd = system.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let threshold = null_tol * top;
    if svd
        .singular_values
        .iter()
        .any(|&sv| sv > threshold && sv <= 1e3 * threshold)
    {
        return Err(Error::InconclusivePropagation(format!(
            "no clear gap in the singular values of the intertwining system (threshold {threshold:e})"
        )));
    }
    let rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= threshold)
        .collect();
    Ok(CMatrix::from_fn(m * nn, rows.len(), |i, j| v_t[(rows[j], i)].conj()))
}

/// Levenberg-Marquardt on the coefficients `c` of `u = V c`, minimizing the
/// Krein-unitarity defect `sum_x ||u_x^dagger S u_x - S||^2`. Intertwining
/// holds throughout because `u` stays in the solution space.
fn polish(
    p: &FermionicProjector,
    basis: &CMatrix,
    start: DVector<C64>,
    m: usize,
    n: usize,
    iters: usize,
) -> Option<Vec<CMatrix>> {
    let s = p.space().spin().matrix();
    let k = basis.ncols();
    let mut blocks = vec_to_blocks(&start, m, n);
    normalize_scale(&mut blocks)?;
    let v0 = basis.adjoint() * blocks_to_vec(&blocks);
    let mut c = CMatrix::from_fn(k, 1, |l, _| v0[l]);

    let residual = |c: &CMatrix| -> DVector<f64> {
        let u = vec_to_blocks(&(basis * c).column(0).into_owned(), m, n);
        let mut r = Vec::with_capacity(2 * m * n * n);
        for b in &u {
            let d = b.adjoint() * &s * b - &s;
            r.extend(d.iter().flat_map(|z| [z.re, z.im]));
        }
        DVector::from_vec(r)
    };
    let jacobian = |c: &CMatrix| -> nalgebra::DMatrix<f64> {
        let u = vec_to_blocks(&(basis * c).column(0).into_owned(), m, n);
        let mut jac = nalgebra::DMatrix::<f64>::zeros(2 * m * n * n, 2 * k);
        for l in 0..k {
            let dir = vec_to_blocks(&basis.column(l).into_owned(), m, n);
            for (part, unit) in [(0, C64::new(1.0, 0.0)), (1, C64::new(0.0, 1.0))] {
                let mut row = 0;
                for (b, db) in u.iter().zip(&dir) {
                    let db = db * unit;
                    let d = db.adjoint() * &s * b + b.adjoint() * &s * &db;
                    for z in d.iter() {
                        jac[(row, 2 * l + part)] = z.re;
                        jac[(row + 1, 2 * l + part)] = z.im;
                        row += 2;
                    }
                }
            }
        }
        jac
    };

    let mut r = residual(&c);
    let mut cost = r.norm_squared();
    let mut mu = 1e-3;
    for _ in 0..iters {
        if cost < 1e-28 {
            break;
        }
        let jac = jacobian(&c);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += mu * (1.0 + jtj[(i, i)]);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let trial = CMatrix::from_fn(k, 1, |l, _| c[(l, 0)] + C64::new(step[2 * l], step[2 * l + 1]));
            let r_trial = residual(&trial);
            let cost_trial = r_trial.norm_squared();
            if cost_trial < cost {
                c = trial;
                r = r_trial;
                cost = cost_trial;
                mu = (mu * 0.3).max(1e-15);
                improved = true;
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some(vec_to_blocks(&(basis * c).column(0).into_owned(), m, n))
}

/// Rescale all blocks by a common factor so the geometric mean of
/// `|det u_x|` is one.
fn normalize_scale(blocks: &mut [CMatrix]) -> Option<()> {
    let n = blocks.first()?.nrows() as f64;
    let mut log_det = 0.0;
    for b in blocks.iter() {
        let d = b.determinant().norm();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        log_det += d.ln();
    }
    let c = (-log_det / (n * blocks.len() as f64)).exp();
    for b in blocks.iter_mut() {
        *b *= C64::new(c, 0.0);
    }
    Some(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreakingConfig {
    pub tol: f64,
    /// Transpositions sampled when there are more than twelve points.
    pub samples: usize,
    pub seed: u64,
}

impl Default for BreakingConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            samples: 66,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BreakingReport {
    pub points: usize,
    pub verdicts: Vec<SymmetryVerdict>,
    pub ruled_out: usize,
    /// True when some transposition is ruled out, so `S_m` cannot be an outer
    /// symmetry group.
    pub sm_ruled_out: bool,
}

impl BreakingReport {
    pub fn fraction_ruled_out(&self) -> f64 {
        if self.verdicts.is_empty() {
            0.0
        } else {
            self.ruled_out as f64 / self.verdicts.len() as f64
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "points": self.points,
            "transpositions": self.verdicts.len(),
            "ruled_out": self.ruled_out,
            "fraction_ruled_out": self.fraction_ruled_out(),
            "sm_ruled_out": self.sm_ruled_out,
            "verdicts": self.verdicts.iter().map(|v| v.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Test transpositions against the spectral fingerprint: all of them for up to
/// twelve points, otherwise a seeded sample.
pub fn sm_breaking_report(p: &FermionicProjector, cfg: &BreakingConfig) -> Result<BreakingReport> {
    let m = p.space().points();
    let fp = fingerprint(p, SPECTRUM_SORT_TOL);
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    if m > 12 && pairs.len() > cfg.samples {
        let mut rng = stream(cfg.seed, 0);
        pairs.shuffle(&mut rng);
        pairs.truncate(cfg.samples);
        pairs.sort_unstable();
    }
    let verdicts = pairs
        .iter()
        .map(|&(i, j)| check_fingerprint(&fp, &Permutation::transposition(m, i, j)?, cfg.tol))
        .collect::<Result<Vec<_>>>()?;
    let ruled_out = verdicts.iter().filter(|v| v.verdict == Verdict::RuledOut).count();
    Ok(BreakingReport {
        points: m,
        verdicts,
        ruled_out,
        sm_ruled_out: ruled_out > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::{KreinSpace, SpinSignature};
    use crate::minimizer::random_feasible;
    use crate::projector::build_projector;

    fn random_projector(m: usize, f: usize, seed: u64) -> FermionicProjector {
        let s = KreinSpace::new(m, SpinSignature::dirac()).unwrap();
        build_projector(&random_feasible(s, f, seed).unwrap()).unwrap()
    }

    /// `psi_j = (a_j, W a_j)` with `W` Krein-unitary is fixed by the block swap
    /// `u_1 = W`, `u_2 = W^{-1}`.
    fn symmetric_pair(seed: u64) -> (FermionicProjector, CMatrix) {
        let s = KreinSpace::new(2, SpinSignature::dirac()).unwrap();
        let mut rng = stream(seed, 9);
        // Krein-unitary W: exp of i times a Krein-symmetric generator
        let h = complex_gaussian_matrix(4, 4, &mut rng);
        let sig = s.spin().matrix();
        let herm = (&h + h.adjoint()) * C64::new(0.2, 0.0);
        let gen = &sig * herm * C64::new(0.0, 1.0);
        let w = gen.exp();
        let a = random_feasible(KreinSpace::new(1, SpinSignature::dirac()).unwrap(), 2, seed)
            .unwrap()
            .into_states();
        let wa = &w * &a;
        let psi = CMatrix::from_fn(8, 2, |i, j| if i < 4 { a[(i, j)] } else { wa[(i - 4, j)] });
        let cfg = crate::projector::FermionConfiguration::new(s, psi).unwrap();
        (build_projector(&cfg).unwrap(), w)
    }

    #[test]
    fn permutation_algebra() {
        let s = Permutation::new(vec![1, 2, 0]).unwrap();
        let t = Permutation::transposition(3, 0, 1).unwrap();
        assert_eq!(s.compose(&t).unwrap(), Permutation::new(vec![2, 1, 0]).unwrap());
        assert!(s.compose(&s.inverse()).unwrap().is_identity());
        assert_eq!(s.one_line(), "[2 3 1]");
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
    }

    #[test]
    fn fingerprint_indexing_covers_all_pairs() {
        let p = random_projector(5, 3, 1);
        let fp = fingerprint(&p, SPECTRUM_SORT_TOL);
        assert_eq!(fp.len(), 15);
        for x in 0..5 {
            for y in 0..5 {
                let (a, b) = (x.min(y), x.max(y));
                assert_eq!(fp.get(x, y).pair(), Some((a, b)));
            }
        }
    }

    #[test]
    fn zero_projector_fingerprint() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let fp = fingerprint(&FermionicProjector::zero(s), SPECTRUM_SORT_TOL);
        assert!(fp.spectra.iter().all(|sp| sp.max_modulus() == 0.0));
    }

    #[test]
    fn identity_is_consistent_and_verified() {
        let p = random_projector(3, 2, 4);
        let id = Permutation::identity(3);
        assert_eq!(necessary_check(&p, &id, 1e-8).unwrap().verdict, Verdict::ConsistentNecessary);
        let v = exact_search(&p, &id, &SearchConfig::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Verified);
        assert!(v.blocks.unwrap().iter().all(|b| (b - CMatrix::identity(4, 4)).norm() == 0.0));
    }

    #[test]
    fn generic_systems_rule_out_every_transposition() {
        for seed in 0..50 {
            let p = random_projector(4, 3, seed);
            for (i, j) in [(0, 1), (1, 3)] {
                let sigma = Permutation::transposition(4, i, j).unwrap();
                let v = necessary_check(&p, &sigma, 1e-8).unwrap();
                assert_eq!(v.verdict, Verdict::RuledOut, "seed {seed}");
                assert!(v.witness_pair.is_some());
            }
        }
    }

    #[test]
    fn symmetric_pair_is_verified_with_block_swap() {
        for seed in 0..5 {
            let (p, w) = symmetric_pair(seed);
            let swap = Permutation::transposition(2, 0, 1).unwrap();
            assert_eq!(
                necessary_check(&p, &swap, 1e-8).unwrap().verdict,
                Verdict::ConsistentNecessary
            );
            let blocks = vec![w.clone(), w.clone().try_inverse().unwrap()];
            let (inter, unit) = verify_blocks(&p, &swap, &blocks).unwrap();
            assert!(inter < 1e-10 && unit < 1e-10);

            let v = exact_search(&p, &swap, &SearchConfig::default()).unwrap();
            assert_eq!(v.verdict, Verdict::Verified, "seed {seed}: {:?}", v.note);
            assert!(v.intertwining_residual.unwrap() <= 1e-6);
        }
    }

    #[test]
    fn generic_swap_is_ruled_out_by_search() {
        let p = random_projector(2, 2, 17);
        let swap = Permutation::transposition(2, 0, 1).unwrap();
        let v = exact_search(&p, &swap, &SearchConfig::default()).unwrap();
        assert_eq!(v.verdict, Verdict::RuledOut);
    }

    #[test]
    fn composition_of_verified_symmetries() {
        let (p, _) = symmetric_pair(3);
        let swap = Permutation::transposition(2, 0, 1).unwrap();
        let v = exact_search(&p, &swap, &SearchConfig::default()).unwrap();
        let blocks = v.blocks.unwrap();
        let (id, composed) = compose(&swap, &blocks, &swap, &blocks).unwrap();
        assert!(id.is_identity());
        let (inter, unit) = verify_blocks(&p, &id, &composed).unwrap();
        assert!(inter < 1e-6 && unit < 1e-6);
    }

    #[test]
    fn zero_projector_admits_every_permutation() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let p = FermionicProjector::zero(s);
        let report = sm_breaking_report(&p, &BreakingConfig::default()).unwrap();
        assert!(!report.sm_ruled_out);
        let sigma = Permutation::new(vec![1, 2, 0]).unwrap();
        let v = exact_search(&p, &sigma, &SearchConfig::default()).unwrap();
        assert_eq!(v.verdict, Verdict::Verified);
    }

    #[test]
    fn vanishing_kernels_are_inconclusive() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let tiny = random_feasible(s, 2, 5).unwrap().into_states() * C64::new(1e-8, 0.0);
        let p = FermionicProjector::from_states(s, tiny);
        let sigma = Permutation::new(vec![1, 2, 0]).unwrap();
        assert!(matches!(
            exact_search(&p, &sigma, &SearchConfig::default()),
            Err(Error::InconclusivePropagation(_))
        ));
    }

    #[test]
    fn breaking_report_on_generic_system() {
        let p = random_projector(12, 5, 2);
        let report = sm_breaking_report(&p, &BreakingConfig::default()).unwrap();
        assert_eq!(report.verdicts.len(), 66);
        assert!(report.sm_ruled_out);
        assert_eq!(report.ruled_out, 66);
        let json = report.to_json();
        assert_eq!(json["sm_ruled_out"], Value::Bool(true));
    }

    #[test]
    fn ruled_out_is_stable_under_tightening() {
        let p = random_projector(4, 2, 8);
        let sigma = Permutation::transposition(4, 0, 2).unwrap();
        let loose = necessary_check(&p, &sigma, 1e-6).unwrap();
        assert_eq!(loose.verdict, Verdict::RuledOut);
        assert!(loose.spectral_mismatch >= 1e-5);
        assert_eq!(necessary_check(&p, &sigma, 1e-7).unwrap().verdict, Verdict::RuledOut);
    }
}
