//! The vacuum Dirac sea on a momentum lattice.
//!
//! The kernel of the sea is the integral over the lower mass shell
//!
//! ```text
//! P(x,y) = ∫ d^{d+1}k / (2π)^{d+1} (k_j γ^j + m) δ(k² - m²) Θ(-k⁰) e^{-ik(x-y)}
//! ```
//!
//! Integrating out `k⁰ = -E(k)` leaves a sum over spatial momenta with weight
//! `1/(2E)`. The sum runs over a lattice of spacing `dk` inside the cutoff
//! (interval in `d = 1`, ball in `d = 3`) and is damped by `exp(-ε E)`.
//! Separations are `dx = x - y` with signature `(+, -, -, -)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::causal::{classify_pair, CausalLabel, CausalTolerances, Classification};
use crate::error::{Error, Result};
use crate::krein::{CMatrix, C64};
use crate::projector::{chain_spectrum, ChainSpectrum, SPECTRUM_SORT_TOL};
use crate::report::{fmt_f64, write_csv};

/// Momenta per parallel chunk; fixed so the summation order does not depend
/// on the thread count.
const CHUNK: usize = 1024;

/// Dirac matrices in the Dirac representation. `γ⁰` equals the spin
/// signature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaConvention {
    spatial_dim: usize,
    gammas: Vec<CMatrix>,
}

impl GammaConvention {
    pub fn new(spatial_dim: usize) -> Result<Self> {
        let c = |re: f64, im: f64| C64::new(re, im);
        let gammas = match spatial_dim {
            1 => vec![
                CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
                CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]),
            ],
            3 => {
                let pauli = [
                    [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
                    [c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
                    [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
                ];
                let mut out = vec![CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    c(1.0, 0.0),
                    c(1.0, 0.0),
                    c(-1.0, 0.0),
                    c(-1.0, 0.0),
                ]))];
                for s in pauli {
                    let mut g = CMatrix::zeros(4, 4);
                    for i in 0..2 {
                        for j in 0..2 {
                            g[(i, j + 2)] = s[2 * i + j];
                            g[(i + 2, j)] = -s[2 * i + j];
                        }
                    }
                    out.push(g);
                }
                out
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "spatial dimension must be 1 or 3, got {other}"
                )))
            }
        };
        Ok(Self { spatial_dim, gammas })
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn spin_dim(&self) -> usize {
        self.gammas[0].nrows()
    }

    /// `γ^j` for `j = 0..=d`.
    pub fn gamma(&self, j: usize) -> &CMatrix {
        &self.gammas[j]
    }

    pub fn metric(j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `v_j γ^j = v⁰ γ⁰ - Σ v^i γ^i`.
    pub fn slash(&self, v: &MinkowskiVector) -> Result<CMatrix> {
        self.check(v)?;
        let n = self.spin_dim();
        let mut out = CMatrix::zeros(n, n);
        for (j, g) in self.gammas.iter().enumerate() {
            out += g * C64::new(Self::metric(j) * v.components[j], 0.0);
        }
        Ok(out)
    }

    fn check(&self, v: &MinkowskiVector) -> Result<()> {
        if v.components.len() != self.spatial_dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.spatial_dim + 1,
                found: v.components.len(),
            });
        }
        Ok(())
    }
}

/// Contravariant components `(v⁰, v¹, ..)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiVector {
    pub components: Vec<f64>,
}

impl MinkowskiVector {
    pub fn new(time: f64, spatial: &[f64]) -> Self {
        let mut components = vec![time];
        components.extend_from_slice(spatial);
        Self { components }
    }

    pub fn spatial_dim(&self) -> usize {
        self.components.len() - 1
    }

    pub fn time(&self) -> f64 {
        self.components[0]
    }

    pub fn spatial_norm(&self) -> f64 {
        self.components[1..].iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Minkowski square `(v⁰)² - |v|²`.
    pub fn square(&self) -> f64 {
        self.time() * self.time() - self.components[1..].iter().map(|c| c * c).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|&c| c == 0.0)
    }

    pub fn neg(&self) -> Self {
        Self {
            components: self.components.iter().map(|c| -c).collect(),
        }
    }

    /// Sign of the Minkowski square; zero is lightlike.
    pub fn causal_label(&self) -> CausalLabel {
        let s = self.square();
        if s > 0.0 {
            CausalLabel::Timelike
        } else if s < 0.0 {
            CausalLabel::Spacelike
        } else {
            CausalLabel::Lightlike
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeaParams {
    pub mass: f64,
    pub cutoff: f64,
    pub dk: f64,
    pub epsilon: f64,
    pub spatial_dim: usize,
}

impl Default for SeaParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            cutoff: 20.0,
            dk: 0.01,
            epsilon: 0.5,
            spatial_dim: 1,
        }
    }
}

impl SeaParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.cutoff > 0.0 && self.dk > 0.0) {
            return bad("cutoff and dk must be positive".into());
        }
        let ratio = self.cutoff / self.dk;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("cutoff / dk = {ratio} is not an integer"));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.spatial_dim != 1 && self.spatial_dim != 3 {
            return bad(format!("spatial_dim must be 1 or 3, got {}", self.spatial_dim));
        }
        Ok(())
    }

    fn steps(&self) -> i64 {
        (self.cutoff / self.dk).round() as i64
    }

    /// Spatial momenta of the lattice inside the cutoff, in a fixed order.
    fn momenta(&self) -> Vec<[f64; 3]> {
        let k = self.steps();
        let dk = self.dk;
        match self.spatial_dim {
            1 => (-k..=k).map(|i| [i as f64 * dk, 0.0, 0.0]).collect(),
            _ => {
                let mut out = Vec::new();
                for i in -k..=k {
                    for j in -k..=k {
                        for l in -k..=k {
                            if i * i + j * j + l * l <= k * k {
                                out.push([i as f64 * dk, j as f64 * dk, l as f64 * dk]);
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// The damped lattice sum for the sea kernel at separation `dx`.
pub fn sea_kernel(params: &SeaParams, dx: &MinkowskiVector) -> Result<CMatrix> {
    params.validate()?;
    let gammas = GammaConvention::new(params.spatial_dim)?;
    gammas.check(dx)?;
    Ok(kernel_with(params, &gammas, &params.momenta(), dx))
}

fn kernel_with(params: &SeaParams, gammas: &GammaConvention, momenta: &[[f64; 3]], dx: &MinkowskiVector) -> CMatrix {
    let d = params.spatial_dim;
    let m = params.mass;
    let t = dx.time();
    let x = &dx.components[1..];
    // accumulate Σw, Σw·E and Σw·k_i, then assemble the matrix once
    let partials: Vec<[C64; 5]> = momenta
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = [C64::new(0.0, 0.0); 5];
            for k in chunk {
                let e = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2] + m * m).sqrt();
                let phase = e * t + (0..d).map(|i| k[i] * x[i]).sum::<f64>();
                let w = C64::from_polar((-params.epsilon * e).exp() / (2.0 * e), phase);
                acc[0] += w;
                acc[1] += w * e;
                for i in 0..d {
                    acc[2 + i] += w * k[i];
                }
            }
            acc
        })
        .collect();
    let mut sums = [C64::new(0.0, 0.0); 5];
    for p in &partials {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    let norm = params.dk.powi(d as i32) / (2.0 * std::f64::consts::PI).powi(d as i32 + 1);
    let n = gammas.spin_dim();
    // k_j γ^j = -E γ⁰ - Σ k^i γ^i on the lower shell
    let mut out = CMatrix::identity(n, n) * (sums[0] * m);
    out -= gammas.gamma(0) * sums[1];
    for i in 0..d {
        out -= gammas.gamma(i + 1) * sums[2 + i];
    }
    out * C64::new(norm, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorScalar {
    pub alpha: C64,
    pub beta: C64,
    /// `||P - α γ·v - β||_F / ||P||_F`.
    pub residual: f64,
    /// Set when `v² = 0` and the coefficients came from the least-squares fit.
    pub lightlike: bool,
}

/// Split `pxy` along `γ·v` and the identity.
pub fn decompose_vector_scalar(pxy: &CMatrix, v: &MinkowskiVector) -> Result<VectorScalar> {
    if v.is_zero() {
        return Err(Error::InvalidParameter("separation vector must be nonzero".into()));
    }
    let gammas = GammaConvention::new(v.spatial_dim())?;
    let n = gammas.spin_dim();
    if pxy.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pxy.nrows(),
        });
    }
    let slash = gammas.slash(v)?;
    let v2 = v.square();
    let euclid: f64 = v.components.iter().map(|c| c * c).sum();
    let beta = pxy.trace() / n as f64;
    let lightlike = v2.abs() <= 1e-12 * euclid;
    let alpha = if lightlike {
        // γ·v is traceless, so the 2x2 normal equations decouple
        (slash.adjoint() * pxy).trace() / slash.norm_squared()
    } else {
        (&slash * pxy).trace() / (n as f64 * v2)
    };
    let remainder = pxy - &slash * alpha - CMatrix::identity(n, n) * beta;
    let norm = pxy.norm();
    let residual = if norm == 0.0 { 0.0 } else { remainder.norm() / norm };
    Ok(VectorScalar {
        alpha,
        beta,
        residual,
        lightlike,
    })
}

/// Closed-form spectrum of `A = (α γ·v + β)(ᾱ γ·v + β̄) = a γ·v + b`:
/// `b ± sqrt(a² v²)`, each with multiplicity `n/2`.
pub fn analytic_chain_spectrum(alpha: C64, beta: C64, v: &MinkowskiVector) -> ChainSpectrum {
    let (a, b) = chain_coefficients(alpha, beta, v);
    let radicand = a * a * v.square();
    let root = if radicand >= 0.0 {
        C64::new(radicand.sqrt(), 0.0)
    } else {
        C64::new(0.0, (-radicand).sqrt())
    };
    let half = if v.spatial_dim() == 1 { 1 } else { 2 };
    let mut values = vec![C64::new(b, 0.0) + root; half];
    values.extend(vec![C64::new(b, 0.0) - root; half]);
    ChainSpectrum::from_values(values)
}

/// `a = α β̄ + β ᾱ` and `b = |α|² v² + |β|²`.
pub fn chain_coefficients(alpha: C64, beta: C64, v: &MinkowskiVector) -> (f64, f64) {
    let a = 2.0 * (alpha * beta.conj()).re;
    let b = alpha.norm_sqr() * v.square() + beta.norm_sqr();
    (a, b)
}

/// `a γ·v + b I` as an explicit matrix.
pub fn chain_matrix(a: f64, b: f64, v: &MinkowskiVector) -> Result<CMatrix> {
    let gammas = GammaConvention::new(v.spatial_dim())?;
    let n = gammas.spin_dim();
    Ok(gammas.slash(v)? * C64::new(a, 0.0) + CMatrix::identity(n, n) * C64::new(b, 0.0))
}

/// Separations `(t, r ê₁)` on a regular `nt x nr` grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeparationGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub nr: usize,
}

impl Default for SeparationGrid {
    fn default() -> Self {
        Self {
            t_min: -5.0,
            t_max: 5.0,
            nt: 40,
            r_min: 0.0,
            r_max: 5.0,
            nr: 40,
        }
    }
}

impl SeparationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nt < 1 || self.nr < 1 {
            return Err(Error::InvalidParameter("separation grid needs at least one node per axis".into()));
        }
        if !(self.t_max >= self.t_min) || !(self.r_max >= self.r_min) || self.r_min < 0.0 {
            return Err(Error::InvalidParameter("separation grid bounds are inverted or negative".into()));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let ts = Self::axis(self.t_min, self.t_max, self.nt);
        let rs = Self::axis(self.r_min, self.r_max, self.nr);
        ts.iter().flat_map(|&t| rs.iter().map(move |&r| (t, r))).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeSample {
    pub t: f64,
    pub r: f64,
    pub classification: Classification,
    pub minkowski: CausalLabel,
    pub agree: bool,
    pub spectrum: ChainSpectrum,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeReport {
    pub params: SeaParams,
    pub grid: SeparationGrid,
    pub margin: f64,
    pub tolerances: CausalTolerances,
    pub samples: Vec<ConeSample>,
    /// Grid nodes inside the light-cone margin, not evaluated.
    pub excluded: usize,
    pub agreement: f64,
}

/// Classify the sea chain `P(dx) P(-dx)` on every grid node outside the
/// margin `| |t| - r | < δ` and compare with the sign of `dx²`.
pub fn cone_agreement(
    params: &SeaParams,
    grid: &SeparationGrid,
    tol: &CausalTolerances,
    margin: f64,
) -> Result<ConeReport> {
    params.validate()?;
    grid.validate()?;
    tol.validate()?;
    if !(margin >= 0.0) {
        return Err(Error::InvalidParameter(format!("margin must be nonnegative, got {margin}")));
    }
    let gammas = GammaConvention::new(params.spatial_dim)?;
    let momenta = params.momenta();
    let nodes = grid.nodes();
    let kept: Vec<(f64, f64)> = nodes
        .iter()
        .copied()
        .filter(|&(t, r)| (t.abs() - r).abs() >= margin)
        .collect();
    let samples: Vec<ConeSample> = kept
        .par_iter()
        .map(|&(t, r)| {
            let mut spatial = vec![0.0; params.spatial_dim];
            spatial[0] = r;
            let dx = MinkowskiVector::new(t, &spatial);
            let forward = kernel_with(params, &gammas, &momenta, &dx);
            let backward = kernel_with(params, &gammas, &momenta, &dx.neg());
            let spectrum = chain_spectrum(&(forward * backward), SPECTRUM_SORT_TOL);
            let classification = classify_pair(&spectrum, tol);
            let minkowski = dx.causal_label();
            ConeSample {
                t,
                r,
                classification,
                minkowski,
                agree: classification.label == minkowski,
                spectrum,
            }
        })
        .collect();
    let agreed = samples.iter().filter(|s| s.agree).count();
    let agreement = if samples.is_empty() {
        0.0
    } else {
        agreed as f64 / samples.len() as f64
    };
    Ok(ConeReport {
        params: *params,
        grid: *grid,
        margin,
        tolerances: *tol,
        excluded: nodes.len() - samples.len(),
        samples,
        agreement,
    })
}

impl ConeReport {
    pub fn header_json(&self) -> serde_json::Value {
        json!({
            "params": self.params,
            "grid": self.grid,
            "margin": self.margin,
            "tolerances": self.tolerances,
            "excluded": self.excluded,
            "agreement": self.agreement,
        })
    }

    /// Heatmap: a `# {json}` line with the parameters, then columns
    /// `t, r, label, minkowski, agree`.
    pub fn write_heatmap<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", self.header_json())?;
        let header: Vec<String> = ["t", "r", "label", "minkowski", "agree"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = self.samples.iter().map(|s| {
            vec![
                fmt_f64(s.t),
                fmt_f64(s.r),
                s.classification.label.to_string(),
                s.minkowski.to_string(),
                s.agree.to_string(),
            ]
        });
        write_csv(out, &header, rows)
    }
}
