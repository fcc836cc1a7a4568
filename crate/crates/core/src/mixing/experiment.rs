use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dephase::{apply_unchecked, DephasingMode};
use super::grid::{make_partition, mix_states, Partition, PartitionPattern, SpacetimeGrid};
use super::kernel::local_cross_norm;
use crate::eigen;
use crate::error::{Error, Result};
use crate::krein::{CMatrix, SpinSignature};
use crate::projector::{lagrangian_of_values, FermionicProjector};
use crate::report::{fmt_f64, write_csv};
use crate::rng::{complex_gaussian_matrix, stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingConfig {
    pub particles: usize,
    pub subsystems: usize,
    pub mode: DephasingMode,
    pub trials: usize,
    pub seed: u64,
    /// Homogenization strip width `Δt` in time slices.
    pub strip_width: usize,
    /// Number of strips along the time axis.
    pub strips: usize,
    pub sites: usize,
    pub spin_dim: usize,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            particles: 8,
            subsystems: 2,
            mode: DephasingMode::HaarSpecialUnitary,
            trials: 100,
            seed: 0,
            strip_width: 2,
            strips: 128,
            sites: 1,
            spin_dim: 4,
        }
    }
}

impl MixingConfig {
    /// Every violated constraint, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.particles == 0 {
            out.push("particles must be at least 1".to_string());
        }
        if self.subsystems == 0 {
            out.push("subsystems must be at least 1".to_string());
        }
        if self.trials == 0 {
            out.push("trials must be at least 1".to_string());
        }
        if self.strip_width == 0 {
            out.push("strip_width must be at least 1".to_string());
        } else if self.strip_width < self.subsystems {
            out.push(format!(
                "strip_width {} must be at least the number of subsystems {}",
                self.strip_width, self.subsystems
            ));
        }
        if self.strips == 0 || self.sites == 0 {
            out.push("strips and sites must be at least 1".to_string());
        }
        if self.spin_dim != 2 && self.spin_dim != 4 {
            out.push(format!("spin_dim must be 2 or 4, got {}", self.spin_dim));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            Some(v) => Err(Error::InvalidParameter(v)),
            None => Ok(()),
        }
    }

    fn spin(&self) -> Result<SpinSignature> {
        SpinSignature::new(self.spin_dim)
    }

    /// Micro grid: `strips * strip_width` time slices.
    pub fn grid(&self) -> Result<SpacetimeGrid> {
        SpacetimeGrid::new(self.strips * self.strip_width, self.sites, self.spin()?)
    }

    /// Dimension of the coarse space the families are drawn on.
    pub fn coarse_dim(&self) -> usize {
        self.strips * self.sites * self.spin_dim
    }
}

/// `f` states that are constant across each strip: complex Gaussian on the
/// coarse `strips x sites` lattice, orthonormalized there and copied into
/// every time slice of the strip. The columns are orthonormal in the
/// strip-averaged measurement product summed over all strips.
pub fn random_family<R: rand::Rng + ?Sized>(
    grid: &SpacetimeGrid,
    strip_width: usize,
    f: usize,
    rng: &mut R,
) -> Result<CMatrix> {
    if strip_width == 0 || grid.times % strip_width != 0 {
        return Err(Error::InvalidParameter(format!(
            "strip width {strip_width} does not divide {} time slices",
            grid.times
        )));
    }
    let n = grid.spin.dim();
    let coarse = grid.times / strip_width * grid.sites * n;
    if f > coarse {
        return Err(Error::InvalidParameter(format!(
            "{f} orthonormal states do not fit in a coarse space of dimension {coarse}"
        )));
    }
    let q = complex_gaussian_matrix(coarse, f, rng).qr().q();
    let space = grid.space();
    let mut out = CMatrix::zeros(space.dim(), f);
    for t in 0..grid.times {
        for x in 0..grid.sites {
            let cell = (t / strip_width) * grid.sites + x;
            out.rows_mut(grid.point(t, x) * n, n).copy_from(&q.rows(cell * n, n));
        }
    }
    Ok(out)
}

/// Identical families on all subsystems, subsystems `1..L` dephased by
/// independent draws. Returns the coherent and the dephased state matrices.
fn coherent_and_dephased<R: rand::Rng + ?Sized>(
    part: &Partition,
    strip_width: usize,
    f: usize,
    mode: DephasingMode,
    rng: &mut R,
) -> Result<(CMatrix, CMatrix)> {
    let fam = random_family(part.grid(), strip_width, f, rng)?;
    let families = vec![fam; part.subsystems()];
    let coherent = mix_states(&families, part)?;
    let mut dephased = coherent.clone();
    for a in 1..part.subsystems() {
        let u = mode.sample(f, rng);
        dephased = apply_unchecked(&dephased, &u, a, part)?;
    }
    Ok((coherent.into_states(), dephased.into_states()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub particles: usize,
    pub mean_coherent: f64,
    pub mean_dephased: f64,
    /// `mean_dephased / mean_coherent`.
    pub ratio: f64,
    /// Standard error of the per-trial ratio.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Normal-approximation 95% interval of the slope.
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let k = pts.len();
    if k < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if k > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (k - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some(LogLogFit {
        slope,
        intercept,
        slope_stderr,
        ci_low: slope - 1.96 * slope_stderr,
        ci_high: slope + 1.96 * slope_stderr,
    })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub config: MixingConfig,
    pub rows: Vec<ScalingRow>,
    pub fit: LogLogFit,
}

impl ScalingReport {
    /// Columns `f, mean_coherent, mean_dephased, ratio, stderr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["f", "mean_coherent", "mean_dephased", "ratio", "stderr"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = self.rows.iter().map(|r| {
            vec![
                r.particles.to_string(),
                fmt_f64(r.mean_coherent),
                fmt_f64(r.mean_dephased),
                fmt_f64(r.ratio),
                fmt_f64(r.stderr),
            ]
        });
        write_csv(out, &header, rows)
    }
}

fn trial_stream(tag: u64, outer: usize, trial: usize) -> u64 {
    (tag << 56) | ((outer as u64) << 32) | trial as u64
}

/// Strip-local cross norm between subsystems 1 and 2 after dephasing, relative
/// to the coherent baseline, for each particle number, with a log-log fit.
pub fn scaling_experiment(cfg: &MixingConfig, f_list: &[usize]) -> Result<ScalingReport> {
    cfg.validate()?;
    if f_list.len() < 4 || f_list.windows(2).any(|w| w[0] >= w[1]) || f_list[0] == 0 {
        return Err(Error::InvalidParameter(
            "f_list needs at least four strictly ascending positive values".into(),
        ));
    }
    if let Some(&big) = f_list.iter().find(|&&f| f > cfg.coarse_dim()) {
        return Err(Error::InvalidParameter(format!(
            "f = {big} exceeds the coarse dimension {}",
            cfg.coarse_dim()
        )));
    }
    let grid = cfg.grid()?;
    let part = make_partition(grid, cfg.subsystems, PartitionPattern::TimeInterleave)?;
    let mut rows = Vec::with_capacity(f_list.len());
    for (fi, &f) in f_list.iter().enumerate() {
        let samples: Vec<(f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<(f64, f64)> {
                if cfg.subsystems == 1 {
                    return Ok((1.0, 1.0));
                }
                let mut rng = stream(cfg.seed, trial_stream(1, fi, trial));
                let (coh, deph) = coherent_and_dephased(&part, cfg.strip_width, f, cfg.mode, &mut rng)?;
                let space = grid.space();
                let c = local_cross_norm(&FermionicProjector::from_states(space, coh), &part, 0, 1, cfg.strip_width)?;
                let d = local_cross_norm(&FermionicProjector::from_states(space, deph), &part, 0, 1, cfg.strip_width)?;
                Ok((c, d))
            })
            .collect::<Result<Vec<_>>>()?;
        let coh: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let deph: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let ratios: Vec<f64> = samples.iter().map(|s| s.1 / s.0).collect();
        let (mean_coherent, _) = mean_and_stderr(&coh);
        let (mean_dephased, _) = mean_and_stderr(&deph);
        let (_, stderr) = mean_and_stderr(&ratios);
        rows.push(ScalingRow {
            particles: f,
            mean_coherent,
            mean_dephased,
            ratio: mean_dephased / mean_coherent,
            stderr,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.particles as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let fit = fit_loglog(&xs, &ys).expect("at least four distinct positive abscissae");
    Ok(ScalingReport {
        config: cfg.clone(),
        rows,
        fit,
    })
}

/// `(1/8) Σ_{a≠b} Σ_{x∈M_a, y∈M_b} L[A_xy]`.
pub fn cross_residual(p: &FermionicProjector, part: &Partition) -> f64 {
    let m = p.space().points();
    let rows: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|x| {
            let mut acc = 0.0;
            for y in x + 1..m {
                if part.subsystem(x) != part.subsystem(y) {
                    let a = p.closed_chain_unchecked(x, y);
                    acc += 2.0 * lagrangian_of_values(&eigen::eigenvalues(&a));
                }
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() / 8.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub subsystems: usize,
    pub residual: f64,
    pub stderr: f64,
    pub positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub config: MixingConfig,
    pub particles: usize,
    pub rows: Vec<CollapseRow>,
    /// Strictly increasing residual along the list of `L`.
    pub monotone: bool,
    /// Power-law fit `R ~ L^p` over the rows with `L >= 2`.
    pub fit: Option<LogLogFit>,
}

impl CollapseReport {
    pub fn exponent(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    /// Columns `L, R, stderr, positive`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["L", "R", "stderr", "positive"].iter().map(|s| s.to_string()).collect();
        let rows = self.rows.iter().map(|r| {
            vec![
                r.subsystems.to_string(),
                fmt_f64(r.residual),
                fmt_f64(r.stderr),
                r.positive.to_string(),
            ]
        });
        write_csv(out, &header, rows)
    }
}

/// Cross-subsystem part of the action for a growing number of dephased
/// subsystems at a fixed number of strips: each strip holds one time slice
/// per subsystem, so the strip width equals `L` and the macroscopic extent
/// stays the same.
pub fn collapse_experiment(cfg: &MixingConfig, l_list: &[usize], particles: usize) -> Result<CollapseReport> {
    let mut base = cfg.clone();
    base.particles = particles;
    base.subsystems = 1;
    base.strip_width = 1;
    base.validate()?;
    if l_list.is_empty() || l_list[0] == 0 || l_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "L list must be strictly ascending and positive".into(),
        ));
    }
    if particles > cfg.coarse_dim() {
        return Err(Error::InvalidParameter(format!(
            "f = {particles} exceeds the coarse dimension {}",
            cfg.coarse_dim()
        )));
    }
    let mut rows = Vec::with_capacity(l_list.len());
    for (li, &l) in l_list.iter().enumerate() {
        let run = MixingConfig {
            subsystems: l,
            strip_width: l,
            ..base.clone()
        };
        let grid = run.grid()?;
        let part = make_partition(grid, l, PartitionPattern::TimeInterleave)?;
        let values: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                if l == 1 {
                    return Ok(0.0);
                }
                let mut rng = stream(cfg.seed, trial_stream(2, li, trial));
                let (_, deph) = coherent_and_dephased(&part, l, particles, cfg.mode, &mut rng)?;
                Ok(cross_residual(&FermionicProjector::from_states(grid.space(), deph), &part))
            })
            .collect::<Result<Vec<_>>>()?;
        let (residual, stderr) = mean_and_stderr(&values);
        rows.push(CollapseRow {
            subsystems: l,
            residual,
            stderr,
            positive: residual > 0.0,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].residual > w[0].residual);
    let fit_rows: Vec<&CollapseRow> = rows.iter().filter(|r| r.subsystems >= 2).collect();
    let fit = fit_loglog(
        &fit_rows.iter().map(|r| r.subsystems as f64).collect::<Vec<_>>(),
        &fit_rows.iter().map(|r| r.residual).collect::<Vec<_>>(),
    );
    Ok(CollapseReport {
        config: cfg.clone(),
        particles,
        rows,
        monotone,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_is_orthonormal_in_the_strip_product() {
        let g = SpacetimeGrid::new(6, 2, SpinSignature::dirac()).unwrap();
        let mut rng = stream(1, 0);
        let fam = random_family(&g, 3, 5, &mut rng).unwrap();
        let gram = fam.adjoint() * &fam / crate::krein::C64::new(3.0, 0.0);
        assert!((gram - CMatrix::identity(5, 5)).norm() < 1e-12);
        assert!(random_family(&g, 3, 17, &mut rng).is_err());
        assert!(random_family(&g, 4, 2, &mut rng).is_err());
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
        assert!(fit_loglog(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn single_subsystem_has_no_suppression() {
        let cfg = MixingConfig {
            subsystems: 1,
            strip_width: 1,
            strips: 8,
            trials: 2,
            ..MixingConfig::default()
        };
        let rep = scaling_experiment(&cfg, &[1, 2, 3, 4]).unwrap();
        assert!(rep.rows.iter().all(|r| r.ratio == 1.0));
        assert_eq!(rep.fit.slope, 0.0);
    }

    #[test]
    fn scaling_rejects_bad_lists() {
        let cfg = MixingConfig {
            strips: 8,
            trials: 1,
            ..MixingConfig::default()
        };
        assert!(scaling_experiment(&cfg, &[1, 2, 3]).is_err());
        assert!(scaling_experiment(&cfg, &[1, 3, 2, 4]).is_err());
        assert!(scaling_experiment(&cfg, &[1, 2, 3, 64]).is_err());
    }

    #[test]
    fn violations_are_all_listed() {
        let cfg = MixingConfig {
            particles: 0,
            trials: 0,
            strip_width: 1,
            subsystems: 2,
            ..MixingConfig::default()
        };
        assert_eq!(cfg.violations().len(), 3);
    }

    #[test]
    fn collapse_small_run() {
        let cfg = MixingConfig {
            strips: 2,
            trials: 3,
            seed: 5,
            ..MixingConfig::default()
        };
        let rep = collapse_experiment(&cfg, &[1, 2, 3], 4).unwrap();
        assert_eq!(rep.rows[0].residual, 0.0);
        assert!(rep.rows[1].positive && rep.rows[2].positive);
        let again = collapse_experiment(&cfg, &[1, 2, 3], 4).unwrap();
        assert_eq!(rep, again);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("L,R,stderr,positive\n1,0.0000000000000000e0,"));
    }
}
