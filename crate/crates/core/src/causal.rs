//! Spectral causal structure.
//!
//! A pair of points is timelike when the closed chain has a real spectrum,
//! spacelike when the spectrum splits into complex conjugate pairs of one
//! common modulus, and lightlike otherwise. All thresholds are relative to the
//! largest eigenvalue modulus, so the labels do not change when a chain is
//! rescaled by a positive factor.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projector::{chain_spectrum, ChainSpectrum, FermionicProjector, SPECTRUM_SORT_TOL};
use crate::report::{fmt_f64, write_csv};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalTolerances {
    /// Imaginary parts below `tol_real * max|lambda|` count as zero.
    pub tol_real: f64,
    /// Moduli within `tol_mod * max|lambda|` count as equal.
    pub tol_mod: f64,
    /// Conjugate partners must agree within `tol_pair * max|lambda|`.
    pub tol_pair: f64,
}

impl Default for CausalTolerances {
    fn default() -> Self {
        Self {
            tol_real: 1e-8,
            tol_mod: 1e-8,
            tol_pair: 1e-8,
        }
    }
}

impl CausalTolerances {
    pub fn new(tol_real: f64, tol_mod: f64, tol_pair: f64) -> Result<Self> {
        let t = Self {
            tol_real,
            tol_mod,
            tol_pair,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_real", self.tol_real),
            ("tol_mod", self.tol_mod),
            ("tol_pair", self.tol_pair),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CausalLabel {
    Timelike,
    Spacelike,
    Lightlike,
}

impl fmt::Display for CausalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CausalLabel::Timelike => "timelike",
            CausalLabel::Spacelike => "spacelike",
            CausalLabel::Lightlike => "lightlike",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: CausalLabel,
    /// Set when the chain vanishes: the zero spectrum is real, hence timelike,
    /// but carries no causal information.
    pub degenerate: bool,
}

pub fn classify_pair(spectrum: &ChainSpectrum, tol: &CausalTolerances) -> Classification {
    let values = spectrum.eigenvalues();
    let scale = spectrum.max_modulus();
    if scale == 0.0 {
        return Classification {
            label: CausalLabel::Timelike,
            degenerate: true,
        };
    }
    let real_eps = tol.tol_real * scale;
    let label = if values.iter().all(|z| z.im.abs() <= real_eps) {
        CausalLabel::Timelike
    } else if is_spacelike(values, scale, tol) {
        CausalLabel::Spacelike
    } else {
        CausalLabel::Lightlike
    };
    Classification {
        label,
        degenerate: false,
    }
}

fn is_spacelike(values: &[crate::krein::C64], scale: f64, tol: &CausalTolerances) -> bool {
    let n = values.len();
    if n == 0 || n % 2 != 0 {
        return false;
    }
    let real_eps = tol.tol_real * scale;
    let upper: Vec<_> = values.iter().filter(|z| z.im > real_eps).collect();
    let mut lower: Vec<_> = values.iter().filter(|z| z.im < -real_eps).collect();
    if upper.len() != n / 2 || lower.len() != n / 2 {
        return false;
    }
    for z in upper {
        let target = z.conj();
        let (k, d) = lower
            .iter()
            .enumerate()
            .map(|(k, w)| (k, (**w - target).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("lower half is nonempty");
        if d > tol.tol_pair * scale {
            return false;
        }
        lower.swap_remove(k);
    }
    let max = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min = values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    max - min <= tol.tol_mod * scale
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalEdge {
    pub x: usize,
    pub y: usize,
    pub classification: Classification,
    pub spectrum: ChainSpectrum,
}

/// Labels of every unordered pair `{x, y}`, self-pairs included.
#[derive(Clone, Debug, Serialize)]
pub struct CausalGraph {
    pub points: usize,
    pub edges: Vec<CausalEdge>,
}

pub fn causal_graph(p: &FermionicProjector, tol: &CausalTolerances) -> CausalGraph {
    let m = p.space().points();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|x| (x..m).map(move |y| (x, y))).collect();
    let edges = pairs
        .par_iter()
        .map(|&(x, y)| {
            let spectrum =
                chain_spectrum(&p.closed_chain_unchecked(x, y), SPECTRUM_SORT_TOL).with_pair(x, y);
            CausalEdge {
                x,
                y,
                classification: classify_pair(&spectrum, tol),
                spectrum,
            }
        })
        .collect();
    CausalGraph { points: m, edges }
}

impl CausalGraph {
    pub fn label(&self, x: usize, y: usize) -> Option<CausalLabel> {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        self.edges
            .iter()
            .find(|e| e.x == a && e.y == b)
            .map(|e| e.classification.label)
    }

    pub fn count(&self, label: CausalLabel) -> usize {
        self.edges
            .iter()
            .filter(|e| e.x != e.y && e.classification.label == label)
            .count()
    }

    /// Undirected DOT graph: solid timelike, dashed spacelike, dotted lightlike.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph causal {\n");
        for x in 0..self.points {
            out.push_str(&format!("  {x};\n"));
        }
        for e in &self.edges {
            let style = match e.classification.label {
                CausalLabel::Timelike => "solid",
                CausalLabel::Spacelike => "dashed",
                CausalLabel::Lightlike => "dotted",
            };
            let extra = if e.classification.degenerate {
                ", color=gray"
            } else {
                ""
            };
            out.push_str(&format!(
                "  {} -- {} [style={style}, label=\"{}\"{extra}];\n",
                e.x, e.y, e.classification.label
            ));
        }
        out.push_str("}\n");
        out
    }

    /// Columns `x, y, label, degenerate, l1_re, l1_im, ..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.edges.first().map(|e| e.spectrum.len()).unwrap_or(0);
        let mut header: Vec<String> = ["x", "y", "label", "degenerate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for i in 1..=n {
            header.push(format!("l{i}_re"));
            header.push(format!("l{i}_im"));
        }
        let rows = self.edges.iter().map(|e| {
            let mut row = vec![
                e.x.to_string(),
                e.y.to_string(),
                e.classification.label.to_string(),
                e.classification.degenerate.to_string(),
            ];
            for z in e.spectrum.eigenvalues() {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            row
        });
        write_csv(out, &header, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::{CMatrix, KreinSpace, SpinSignature, C64};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn label(values: Vec<C64>) -> CausalLabel {
        classify_pair(&ChainSpectrum::from_values(values), &CausalTolerances::default()).label
    }

    #[test]
    fn definition_examples() {
        assert_eq!(
            label(vec![c(2.0, 0.0), c(2.0, 0.0), c(0.5, 0.0), c(0.5, 0.0)]),
            CausalLabel::Timelike
        );
        assert_eq!(
            label(vec![c(1.0, 1.0), c(1.0, -1.0), c(-1.0, 1.0), c(-1.0, -1.0)]),
            CausalLabel::Spacelike
        );
        assert_eq!(
            label(vec![c(1.0, 1.0), c(1.0, -1.0), c(2.0, 0.0), c(2.0, 0.0)]),
            CausalLabel::Lightlike
        );
    }

    #[test]
    fn conjugate_pairs_with_different_moduli_are_lightlike() {
        assert_eq!(
            label(vec![c(1.0, 1.0), c(1.0, -1.0), c(2.0, 1.0), c(2.0, -1.0)]),
            CausalLabel::Lightlike
        );
        // non-conjugate complex values
        assert_eq!(
            label(vec![c(1.0, 1.0), c(1.0, 1.0), c(-1.0, 1.0), c(-1.0, -1.0)]),
            CausalLabel::Lightlike
        );
    }

    #[test]
    fn two_component_spectra() {
        assert_eq!(label(vec![c(0.3, 0.5), c(0.3, -0.5)]), CausalLabel::Spacelike);
        assert_eq!(label(vec![c(0.3, 0.0), c(0.1, 0.0)]), CausalLabel::Timelike);
    }

    #[test]
    fn zero_spectrum_is_degenerate_timelike() {
        let cls = classify_pair(
            &ChainSpectrum::from_values(vec![c(0.0, 0.0); 4]),
            &CausalTolerances::default(),
        );
        assert_eq!(cls.label, CausalLabel::Timelike);
        assert!(cls.degenerate);
    }

    #[test]
    fn tolerances_must_be_positive() {
        assert!(CausalTolerances::new(1e-8, 0.0, 1e-8).is_err());
        assert!(CausalTolerances::new(1e-8, 1e-8, 1e-8).is_ok());
    }

    #[test]
    fn zero_projector_graph_is_all_timelike() {
        let s = KreinSpace::new(3, SpinSignature::dirac()).unwrap();
        let p = FermionicProjector::zero(s);
        let g = causal_graph(&p, &CausalTolerances::default());
        assert_eq!(g.edges.len(), 6);
        assert!(g
            .edges
            .iter()
            .all(|e| e.classification.label == CausalLabel::Timelike && e.classification.degenerate));
        let dot = g.to_dot();
        assert!(dot.starts_with("graph causal {"));
        assert!(dot.contains("0 -- 2 [style=solid"));
    }

    #[test]
    fn single_point_graph_has_self_pair() {
        let s = KreinSpace::new(1, SpinSignature::dirac()).unwrap();
        let mut psi = CMatrix::zeros(4, 1);
        psi[(2, 0)] = c(1.0, 0.0);
        let p = FermionicProjector::from_states(s, psi);
        let g = causal_graph(&p, &CausalTolerances::default());
        assert_eq!(g.points, 1);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.label(0, 0), Some(CausalLabel::Timelike));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("x,y,label,degenerate,l1_re"));
    }
}
