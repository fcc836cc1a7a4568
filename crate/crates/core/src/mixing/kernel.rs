use serde::Serialize;

use super::grid::Partition;
use crate::error::{Error, Result};
use crate::krein::{CMatrix, C64};
use crate::projector::FermionicProjector;

fn check_pair(part: &Partition, p: &FermionicProjector, a: usize, b: usize) -> Result<()> {
    if *p.space() != part.grid().space() {
        return Err(Error::DimensionMismatch {
            expected: part.grid().space().dim(),
            found: p.space().dim(),
        });
    }
    if a == b {
        return Err(Error::InvalidParameter(format!(
            "cross norms need two different subsystems, got {a} twice"
        )));
    }
    part.check_subsystem(a)?;
    part.check_subsystem(b)
}

fn stacked_rows(p: &FermionicProjector, points: &[usize]) -> CMatrix {
    let n = p.space().spin_dim();
    let f = p.particle_number();
    let mut out = CMatrix::zeros(points.len() * n, f);
    for (k, &x) in points.iter().enumerate() {
        out.rows_mut(k * n, n).copy_from(p.state_block(x));
    }
    out
}

/// `sqrt(Σ_{x∈M_a, y∈M_b} ||P(x,y)||² / (|M_a| |M_b|))`.
///
/// With families that are orthonormal over the whole subsystem this is
/// invariant under dephasing; see [`local_cross_norm`].
pub fn cross_block_norm(p: &FermionicProjector, part: &Partition, a: usize, b: usize) -> Result<f64> {
    check_pair(part, p, a, b)?;
    let ma = part.members(a);
    let mb = part.members(b);
    // Σ ||B_x B_y^†||² = tr(G_a G_b) with G = B^† B
    let ga = {
        let r = stacked_rows(p, &ma);
        r.adjoint() * r
    };
    let gb = {
        let r = stacked_rows(p, &mb);
        r.adjoint() * r
    };
    let total = (ga * gb).trace().re.max(0.0);
    Ok((total / (ma.len() * mb.len()) as f64).sqrt())
}

/// Like [`cross_block_norm`], restricted to pairs in a common time strip
/// `[k Δt, (k+1) Δt)`. Strips that miss either subsystem do not contribute.
pub fn local_cross_norm(
    p: &FermionicProjector,
    part: &Partition,
    a: usize,
    b: usize,
    dt: usize,
) -> Result<f64> {
    check_pair(part, p, a, b)?;
    let grid = part.grid();
    check_strip(grid.times, dt, part.subsystems())?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for k in 0..grid.times / dt {
        let strip: Vec<usize> = (k * dt * grid.sites..(k + 1) * dt * grid.sites).collect();
        let in_a: Vec<usize> = strip.iter().copied().filter(|&x| part.subsystem(x) == a).collect();
        let in_b: Vec<usize> = strip.iter().copied().filter(|&x| part.subsystem(x) == b).collect();
        if in_a.is_empty() || in_b.is_empty() {
            continue;
        }
        let ra = stacked_rows(p, &in_a);
        let rb = stacked_rows(p, &in_b);
        total += (ra * rb.adjoint()).norm_squared();
        pairs += in_a.len() * in_b.len();
    }
    if pairs == 0 {
        return Err(Error::EmptySubsystem(b));
    }
    Ok((total / pairs as f64).sqrt())
}

fn check_strip(times: usize, dt: usize, subsystems: usize) -> Result<()> {
    if dt < subsystems.max(1) {
        return Err(Error::InvalidParameter(format!(
            "strip width {dt} is smaller than the number of subsystems {subsystems}"
        )));
    }
    if times % dt != 0 {
        return Err(Error::InvalidParameter(format!(
            "strip width {dt} does not divide {times} time slices"
        )));
    }
    Ok(())
}

/// Kernel averaged over strip cells `(k, x)`, split into the contributions of
/// pairs within one subsystem and pairs across subsystems.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveKernel {
    pub strips: usize,
    pub sites: usize,
    pub spin_dim: usize,
    #[serde(skip)]
    pub coarse: CMatrix,
    #[serde(skip)]
    pub same: CMatrix,
    #[serde(skip)]
    pub cross: CMatrix,
}

impl EffectiveKernel {
    /// `||cross||_F / ||coarse||_F`.
    pub fn relative_cross(&self) -> f64 {
        let c = self.coarse.norm();
        if c == 0.0 {
            0.0
        } else {
            self.cross.norm() / c
        }
    }

    /// `||coarse - reference||_F / ||coarse||_F`.
    pub fn relative_deviation(&self, reference: &CMatrix) -> f64 {
        let c = self.coarse.norm();
        if c == 0.0 {
            reference.norm()
        } else {
            (&self.coarse - reference).norm() / c
        }
    }

    fn cell_diagonal_norm(&self, m: &CMatrix) -> f64 {
        let n = self.spin_dim;
        (0..self.strips * self.sites)
            .map(|c| m.view((c * n, c * n), (n, n)).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// [`relative_cross`](Self::relative_cross) restricted to the blocks
    /// `P̄(kx, kx)` of a cell with itself.
    pub fn local_relative_cross(&self) -> f64 {
        let c = self.cell_diagonal_norm(&self.coarse);
        if c == 0.0 {
            0.0
        } else {
            self.cell_diagonal_norm(&self.cross) / c
        }
    }
}

/// Average `P(x, y)` over strip cells:
/// `P̄(kx, k'x') = Δt⁻² Σ_{t∈k, t'∈k'} P((t,x), (t',x'))`.
pub fn effective_kernel(p: &FermionicProjector, part: &Partition, dt: usize) -> Result<EffectiveKernel> {
    let grid = part.grid();
    if *p.space() != grid.space() {
        return Err(Error::DimensionMismatch {
            expected: grid.space().dim(),
            found: p.space().dim(),
        });
    }
    check_strip(grid.times, dt, part.subsystems())?;
    let n = p.space().spin_dim();
    let f = p.particle_number();
    let strips = grid.times / dt;
    let cells = strips * grid.sites;
    let scale = C64::new(1.0 / dt as f64, 0.0);
    // per-subsystem averaged state blocks C_a(k, x)
    let mut per: Vec<CMatrix> = vec![CMatrix::zeros(cells * n, f); part.subsystems()];
    for t in 0..grid.times {
        for x in 0..grid.sites {
            let pt = grid.point(t, x);
            let cell = (t / dt) * grid.sites + x;
            let mut rows = per[part.subsystem(pt)].rows_mut(cell * n, n);
            rows += p.state_block(pt) * scale;
        }
    }
    let signature = |m: CMatrix| -> CMatrix {
        // P = -C C^† S with S = diag(+, .., -, ..) per cell
        let mut m = -m;
        for c in 0..cells {
            for j in n / 2..n {
                m.column_mut(c * n + j).neg_mut();
            }
        }
        m
    };
    let total: CMatrix = per.iter().fold(CMatrix::zeros(cells * n, f), |acc, c| acc + c);
    let coarse = signature(&total * total.adjoint());
    let same = signature(
        per.iter()
            .fold(CMatrix::zeros(cells * n, cells * n), |acc, c| acc + c * c.adjoint()),
    );
    let cross = &coarse - &same;
    Ok(EffectiveKernel {
        strips,
        sites: grid.sites,
        spin_dim: n,
        coarse,
        same,
        cross,
    })
}
