use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::{CMatrix, KreinSpace, SpinSignature, WaveVector, C64};
use crate::projector::FermionConfiguration;

/// A `T x X` lattice of space-time points; point `(t, x)` has index `t X + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpacetimeGrid {
    pub times: usize,
    pub sites: usize,
    pub spin: SpinSignature,
}

impl SpacetimeGrid {
    pub fn new(times: usize, sites: usize, spin: SpinSignature) -> Result<Self> {
        if times == 0 || sites == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive extent, got {times} x {sites}"
            )));
        }
        Ok(Self { times, sites, spin })
    }

    pub fn points(&self) -> usize {
        self.times * self.sites
    }

    pub fn space(&self) -> KreinSpace {
        KreinSpace::new(self.points(), self.spin).expect("grid has at least one point")
    }

    pub fn point(&self, t: usize, x: usize) -> usize {
        t * self.sites + x
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        (p / self.sites, p % self.sites)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionPattern {
    /// `a(t, x) = t mod L`.
    TimeInterleave,
    /// `a(t, x) = (t + x) mod L`.
    Checkerboard,
}

/// Disjoint covering of the grid by `L` subsystems, labelled `0..L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    grid: SpacetimeGrid,
    subsystems: usize,
    assign: Vec<usize>,
}

pub fn make_partition(grid: SpacetimeGrid, subsystems: usize, pattern: PartitionPattern) -> Result<Partition> {
    if subsystems == 0 {
        return Err(Error::InvalidParameter("need at least one subsystem".into()));
    }
    if grid.times < subsystems {
        return Err(Error::InvalidParameter(format!(
            "{} time slices cannot interleave {subsystems} subsystems",
            grid.times
        )));
    }
    let assign = (0..grid.points())
        .map(|p| {
            let (t, x) = grid.coords(p);
            match pattern {
                PartitionPattern::TimeInterleave => t % subsystems,
                PartitionPattern::Checkerboard => (t + x) % subsystems,
            }
        })
        .collect();
    let part = Partition {
        grid,
        subsystems,
        assign,
    };
    debug_assert!(part.is_fine_grained());
    Ok(part)
}

impl Partition {
    pub fn grid(&self) -> &SpacetimeGrid {
        &self.grid
    }

    pub fn subsystems(&self) -> usize {
        self.subsystems
    }

    pub fn subsystem(&self, p: usize) -> usize {
        self.assign[p]
    }

    pub fn members(&self, a: usize) -> Vec<usize> {
        (0..self.assign.len()).filter(|&p| self.assign[p] == a).collect()
    }

    /// Every window of `L` consecutive time slices meets every subsystem at
    /// every spatial site.
    pub fn is_fine_grained(&self) -> bool {
        let l = self.subsystems;
        (0..=self.grid.times - l).all(|t0| {
            (0..self.grid.sites).all(|x| {
                let mut seen = vec![false; l];
                for t in t0..t0 + l {
                    seen[self.assign[self.grid.point(t, x)]] = true;
                }
                seen.iter().all(|&s| s)
            })
        })
    }

    pub(crate) fn check_subsystem(&self, a: usize) -> Result<()> {
        if a >= self.subsystems {
            return Err(Error::InvalidParameter(format!(
                "subsystem {a} out of range for {} subsystems",
                self.subsystems
            )));
        }
        if !self.assign.contains(&a) {
            return Err(Error::EmptySubsystem(a));
        }
        Ok(())
    }
}

/// Splice `L` state families: on the points of subsystem `a` the result
/// coincides with family `a`.
pub fn mix_states(families: &[CMatrix], part: &Partition) -> Result<FermionConfiguration> {
    if families.len() != part.subsystems() {
        return Err(Error::DimensionMismatch {
            expected: part.subsystems(),
            found: families.len(),
        });
    }
    let space = part.grid().space();
    let f = families[0].ncols();
    for fam in families {
        if fam.nrows() != space.dim() || fam.ncols() != f {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: fam.nrows(),
            });
        }
    }
    let mut states = CMatrix::zeros(space.dim(), f);
    for p in 0..space.points() {
        let rows = space.block(p);
        let src = &families[part.subsystem(p)];
        states
            .rows_mut(rows.start, rows.len())
            .copy_from(&src.rows(rows.start, rows.len()));
    }
    FermionConfiguration::new(space, states)
}

/// `(1/Δt) Σ_{t0 <= t < t0+Δt} Σ_x ψ(t,x)^† φ(t,x)`, the positive-definite
/// product averaged over a time strip.
pub fn measurement_product(
    grid: &SpacetimeGrid,
    psi: &WaveVector,
    phi: &WaveVector,
    t0: usize,
    dt: usize,
) -> Result<C64> {
    let space = grid.space();
    if *psi.space() != space || *phi.space() != space {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: psi.space().dim(),
        });
    }
    if dt == 0 || t0 + dt > grid.times {
        return Err(Error::InvalidParameter(format!(
            "strip [{t0}, {}) does not fit in {} time slices",
            t0 + dt,
            grid.times
        )));
    }
    let n = space.spin_dim();
    let start = grid.point(t0, 0) * n;
    let len = dt * grid.sites * n;
    let a = psi.amps().rows(start, len);
    let b = phi.amps().rows(start, len);
    Ok(a.dotc(&b) / dt as f64)
}

/// Frobenius norms of the four rank-one kernels built from `ψ = ψ↑ + ψ↓`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SplitNorms {
    pub up_up: f64,
    pub down_down: f64,
    pub up_down: f64,
    pub down_up: f64,
}

impl SplitNorms {
    pub fn localized(&self) -> f64 {
        (self.up_up * self.up_up + self.down_down * self.down_down).sqrt()
    }

    pub fn delocalized(&self) -> f64 {
        (self.up_down * self.up_down + self.down_up * self.down_up).sqrt()
    }
}

/// Split `ψ` by a point predicate and return the norms of
/// `|ψ↑≻≺ψ↑|`, `|ψ↓≻≺ψ↓|`, `|ψ↑≻≺ψ↓|`, `|ψ↓≻≺ψ↑|`.
pub fn split_contributions<F: Fn(usize) -> bool>(psi: &WaveVector, mask: F) -> SplitNorms {
    let space = psi.space();
    let mut up = psi.amps().clone();
    let mut down = psi.amps().clone();
    for p in 0..space.points() {
        let r = space.block(p);
        if mask(p) {
            down.rows_mut(r.start, r.len()).fill(C64::new(0.0, 0.0));
        } else {
            up.rows_mut(r.start, r.len()).fill(C64::new(0.0, 0.0));
        }
    }
    // |a≻≺b| = a b^† S_H, and S_H is unitary
    let norm = |a: &crate::krein::CVector, b: &crate::krein::CVector| {
        let k = a * b.adjoint();
        space.apply_signature_right(&k).norm()
    };
    SplitNorms {
        up_up: norm(&up, &up),
        down_down: norm(&down, &down),
        up_down: norm(&up, &down),
        down_up: norm(&down, &up),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_gaussian_matrix, stream};

    fn grid(t: usize, x: usize) -> SpacetimeGrid {
        SpacetimeGrid::new(t, x, SpinSignature::dirac()).unwrap()
    }

    #[test]
    fn time_interleave_examples() {
        let part = make_partition(grid(4, 1), 2, PartitionPattern::TimeInterleave).unwrap();
        assert_eq!(part.members(0), vec![0, 2]);
        assert_eq!(part.members(1), vec![1, 3]);
        let one = make_partition(grid(3, 2), 1, PartitionPattern::TimeInterleave).unwrap();
        assert_eq!(one.members(0).len(), 6);
        assert!(make_partition(grid(1, 1), 2, PartitionPattern::TimeInterleave).is_err());
    }

    #[test]
    fn checkerboard_is_fine_grained() {
        let part = make_partition(grid(6, 3), 3, PartitionPattern::Checkerboard).unwrap();
        assert!(part.is_fine_grained());
        assert_eq!(part.subsystem(grid(6, 3).point(1, 2)), 0);
    }

    #[test]
    fn splicing() {
        let g = grid(4, 2);
        let part = make_partition(g, 2, PartitionPattern::TimeInterleave).unwrap();
        let mut rng = stream(1, 0);
        let a = complex_gaussian_matrix(g.space().dim(), 3, &mut rng);
        let b = complex_gaussian_matrix(g.space().dim(), 3, &mut rng);
        let same = mix_states(&[a.clone(), a.clone()], &part).unwrap();
        assert_eq!(same.states(), &a);
        let mixed = mix_states(&[a.clone(), b.clone()], &part).unwrap();
        let space = g.space();
        for p in 0..space.points() {
            let src = if part.subsystem(p) == 0 { &a } else { &b };
            let r = space.block(p);
            assert_eq!(mixed.states().rows(r.start, r.len()), src.rows(r.start, r.len()));
        }
        let single = make_partition(g, 1, PartitionPattern::TimeInterleave).unwrap();
        assert_eq!(mix_states(&[b.clone()], &single).unwrap().states(), &b);
        assert!(mix_states(&[a], &part).is_err());
    }

    #[test]
    fn measurement_product_is_positive() {
        let g = grid(4, 2);
        let s = g.space();
        let e3 = WaveVector::basis(s, s.block(g.point(1, 0)).start + 2).unwrap();
        assert!(crate::krein::inner_product(&e3, &e3).unwrap().re < 0.0);
        let v = measurement_product(&g, &e3, &e3, 0, 2).unwrap();
        assert!(v.re > 0.0 && v.im == 0.0);
        assert_eq!(measurement_product(&g, &e3, &e3, 2, 2).unwrap(), C64::new(0.0, 0.0));
        assert!(measurement_product(&g, &e3, &e3, 3, 2).is_err());
        // full-grid strip is the time average of the spatial products
        let full = measurement_product(&g, &e3, &e3, 0, 4).unwrap();
        assert!((full.re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn split_norm_identities() {
        let g = grid(2, 2);
        let s = g.space();
        let mut rng = stream(2, 0);
        let psi = WaveVector::new(s, complex_gaussian_matrix(s.dim(), 1, &mut rng).column(0).into_owned()).unwrap();
        let mask = |p: usize| p < 2;
        let n = split_contributions(&psi, mask);
        assert!((n.up_down - n.down_up).abs() < 1e-12);
        assert!((n.up_down * n.up_down - n.up_up * n.down_down).abs() < 1e-10);
        let none = split_contributions(&psi, |_| true);
        assert_eq!(none.up_down, 0.0);
        assert_eq!(none.down_up, 0.0);
    }
}
