//! Minimization of the causal action at fixed particle number.
//!
//! The search runs over raw state matrices `Psi` (`N x f`, complex). Every
//! iterate is pulled back onto the constraint set `Psi^dagger S_H Psi = -I` by
//! [`orthonormalize`], which acts as the retraction. The action depends only on
//! the span, so the objective is `action(orthonormalize(Psi))`.
//!
//! Gradients are central finite differences over the `2 N f` real parameters
//! (real and imaginary part of each entry, column-major). The line search is
//! Armijo backtracking; it tolerates failed decrease at kinks of `|lambda|` by
//! shrinking, and treats failed retractions (steps that leave the negative
//! cone) the same way. Restarts and a simulated-annealing phase are optional.

use std::io::Write;

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krein::{CMatrix, KreinSpace, C64};
use crate::projector::{orthonormalize, FermionConfiguration, FermionicProjector};
use crate::report::{fmt_f64, write_csv};
use crate::rng::{complex_gaussian_matrix, stream};

const SMALLEST_STEP: f64 = 1e-14;
const FEASIBILITY_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealingSchedule {
    pub initial_temperature: f64,
    /// Geometric cooling factor per step, in `(0, 1)`.
    pub decay: f64,
    pub steps: usize,
    /// Proposal size relative to the RMS entry of `Psi`.
    pub proposal_scale: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: 1e-2,
            decay: 0.995,
            steps: 500,
            proposal_scale: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerConfig {
    pub max_iters: usize,
    /// Relative finite-difference step; the step for parameter `p` is
    /// `fd_step * max(1, |p|)`.
    pub fd_step: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Length of the first trial displacement in parameter space.
    pub initial_step: f64,
    pub restarts: usize,
    pub annealing: Option<AnnealingSchedule>,
    pub seed: u64,
    /// Stop when an accepted step lowers the action by less than this.
    pub tolerance: f64,
    /// Stop when the gradient norm drops below this.
    pub gradient_tol: f64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            fd_step: 1e-5,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 0.1,
            restarts: 0,
            annealing: None,
            seed: 0,
            tolerance: 1e-12,
            gradient_tol: 1e-8,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.tolerance > 0.0) || !(self.gradient_tol > 0.0) {
            return bad("convergence thresholds must be positive");
        }
        if let Some(a) = &self.annealing {
            if !(a.initial_temperature > 0.0) || !(a.decay > 0.0 && a.decay < 1.0) {
                return bad("annealing needs a positive temperature and decay in (0, 1)");
            }
            if !(a.proposal_scale > 0.0) {
                return bad("annealing proposal_scale must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceMarker {
    Start,
    Step,
    Restart,
    Anneal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub action: f64,
    pub step: f64,
    pub gradient_norm: f64,
    pub marker: TraceMarker,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub entries: Vec<TraceEntry>,
    /// Finite-difference coordinates skipped because a perturbation left the
    /// feasible set, summed over all gradient evaluations.
    pub skipped_coordinates: usize,
}

impl OptimizationTrace {
    fn push(&mut self, iteration: usize, action: f64, step: f64, gradient_norm: f64, marker: TraceMarker) {
        self.entries.push(TraceEntry {
            iteration,
            action,
            step,
            gradient_norm,
            marker,
        });
    }

    pub fn initial_action(&self) -> Option<f64> {
        self.entries.first().map(|e| e.action)
    }

    /// Action values of accepted gradient steps, split into runs that start at
    /// a `Start` or `Restart` marker.
    pub fn descent_segments(&self) -> Vec<Vec<f64>> {
        let mut segments: Vec<Vec<f64>> = Vec::new();
        for e in &self.entries {
            match e.marker {
                TraceMarker::Start | TraceMarker::Restart => segments.push(vec![e.action]),
                TraceMarker::Step => {
                    if let Some(seg) = segments.last_mut() {
                        seg.push(e.action);
                    }
                }
                TraceMarker::Anneal => {}
            }
        }
        segments
    }

    /// Columns `iteration, action, step, gradient_norm, marker`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["iteration", "action", "step", "gradient_norm", "marker"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = self.entries.iter().map(|e| {
            vec![
                e.iteration.to_string(),
                fmt_f64(e.action),
                fmt_f64(e.step),
                fmt_f64(e.gradient_norm),
                format!("{:?}", e.marker).to_lowercase(),
            ]
        });
        write_csv(out, &header, rows)
    }
}

/// A random Krein-orthonormal configuration, deterministic per seed.
///
/// Negative-signature coordinates are drawn standard complex normal, positive
/// ones with a damped amplitude; on a failed draw the damping is halved.
pub fn random_feasible(space: KreinSpace, particles: usize, seed: u64) -> Result<FermionConfiguration> {
    if particles == 0 {
        return Err(Error::InvalidParameter("particle number must be positive".into()));
    }
    if particles > space.negative_cone_dim() {
        return Err(Error::ParticleNumberTooLarge {
            particles,
            cone: space.negative_cone_dim(),
        });
    }
    let mut rng = stream(seed, 0);
    let mut damping: f64 = rng.random_range(0.2..0.9);
    for _ in 0..FEASIBILITY_ATTEMPTS {
        let mut psi = complex_gaussian_matrix(space.dim(), particles, &mut rng);
        for i in 0..space.dim() {
            if space.sign(i) > 0.0 {
                psi.row_mut(i).scale_mut(damping);
            }
        }
        if let Ok(q) = orthonormalize(&space, &psi) {
            return FermionConfiguration::new(space, q);
        }
        damping *= 0.5;
    }
    Err(Error::ParticleNumberTooLarge {
        particles,
        cone: space.negative_cone_dim(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    /// Parameters whose perturbation left the domain of the objective.
    pub skipped: Vec<usize>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Central differences of `objective` at `x`. Coordinates where either
/// perturbed evaluation returns `None` get a zero component and are reported.
pub fn central_difference<F>(x: &[f64], fd_step: f64, objective: F) -> Gradient
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let results: Vec<Option<f64>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = fd_step * x[i].abs().max(1.0);
            let mut probe = x.to_vec();
            probe[i] = x[i] + h;
            let up = objective(&probe)?;
            probe[i] = x[i] - h;
            let down = objective(&probe)?;
            Some((up - down) / (2.0 * h))
        })
        .collect();
    let mut skipped = Vec::new();
    let values = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.unwrap_or_else(|| {
                skipped.push(i);
                0.0
            })
        })
        .collect();
    Gradient { values, skipped }
}

pub(crate) fn to_params(psi: &CMatrix) -> Vec<f64> {
    psi.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub(crate) fn from_params(rows: usize, cols: usize, params: &[f64]) -> CMatrix {
    CMatrix::from_iterator(
        rows,
        cols,
        params.chunks_exact(2).map(|p| C64::new(p[0], p[1])),
    )
}

/// `action(orthonormalize(Psi))`, or `None` outside the negative cone.
pub fn constrained_action(space: &KreinSpace, psi: &CMatrix) -> Option<f64> {
    let q = orthonormalize(space, psi).ok()?;
    Some(FermionicProjector::from_states(*space, q).action())
}

/// Finite-difference gradient of the constrained action over the real and
/// imaginary parts of every entry of `Psi`.
pub fn fd_gradient(config: &FermionConfiguration, fd_step: f64) -> Gradient {
    let space = *config.space();
    let (rows, cols) = config.states().shape();
    let x = to_params(config.states());
    central_difference(&x, fd_step, |p| {
        constrained_action(&space, &from_params(rows, cols, p))
    })
}

struct Descent {
    psi: CMatrix,
    action: f64,
}

/// Minimize the action starting from `config0`.
///
/// Returns the best configuration found (Krein-orthonormal) and the trace.
pub fn minimize_action(
    config0: &FermionConfiguration,
    cfg: &MinimizerConfig,
) -> Result<(FermionConfiguration, OptimizationTrace)> {
    cfg.validate()?;
    let space = *config0.space();
    let psi0 = orthonormalize(&space, config0.states())?;
    let action0 = FermionicProjector::from_states(space, psi0.clone()).action();

    let mut trace = OptimizationTrace::default();
    trace.push(0, action0, 0.0, 0.0, TraceMarker::Start);
    let mut iteration = 0usize;

    let mut best = descend(&space, psi0, action0, cfg, &mut trace, &mut iteration)?;

    let mut rng = stream(cfg.seed, 1);
    for restart in 0..cfg.restarts {
        let Some((psi, action)) = perturb(&space, &best.psi, 0.1, &mut rng) else {
            debug!("restart {restart}: no feasible perturbation");
            continue;
        };
        trace.push(iteration, action, 0.0, 0.0, TraceMarker::Restart);
        let run = descend(&space, psi, action, cfg, &mut trace, &mut iteration)?;
        if run.action < best.action {
            best = run;
        }
    }

    if let Some(schedule) = &cfg.annealing {
        let annealed = anneal(&space, &best, schedule, &mut rng, &mut trace, &mut iteration);
        if annealed.action < best.action {
            trace.push(iteration, annealed.action, 0.0, 0.0, TraceMarker::Restart);
            let polished = descend(&space, annealed.psi, annealed.action, cfg, &mut trace, &mut iteration)?;
            if polished.action < best.action {
                best = polished;
            }
        }
    }

    info!(
        "minimization finished after {iteration} iterations: action {action0:.6e} -> {:.6e}",
        best.action
    );
    let mut result = FermionConfiguration::new(space, best.psi)?;
    if let Some(roles) = config0.roles() {
        result = result.with_roles(roles.to_vec())?;
    }
    Ok((result, trace))
}

fn descend(
    space: &KreinSpace,
    mut psi: CMatrix,
    mut action: f64,
    cfg: &MinimizerConfig,
    trace: &mut OptimizationTrace,
    iteration: &mut usize,
) -> Result<Descent> {
    let (rows, cols) = psi.shape();
    let mut scale = f64::NAN;
    for _ in 0..cfg.max_iters {
        let x = to_params(&psi);
        let grad = central_difference(&x, cfg.fd_step, |p| {
            constrained_action(space, &from_params(rows, cols, p))
        });
        trace.skipped_coordinates += grad.skipped.len();
        let gnorm = grad.norm();
        if gnorm < cfg.gradient_tol {
            break;
        }
        if scale.is_nan() {
            scale = cfg.initial_step / gnorm;
        }
        let mut t = scale;
        let mut retraction_failures = 0usize;
        let mut attempts = 0usize;
        let mut accepted = None;
        while t >= SMALLEST_STEP {
            attempts += 1;
            let cand: Vec<f64> = x.iter().zip(&grad.values).map(|(a, g)| a - t * g).collect();
            match orthonormalize(space, &from_params(rows, cols, &cand)) {
                Err(_) => retraction_failures += 1,
                Ok(q) => {
                    let value = FermionicProjector::from_states(*space, q.clone()).action();
                    if value <= action - cfg.armijo_c * t * gnorm * gnorm {
                        accepted = Some((q, value));
                        break;
                    }
                }
            }
            t *= cfg.shrink;
        }
        match accepted {
            Some((q, value)) => {
                *iteration += 1;
                let decrease = action - value;
                psi = q;
                action = value;
                trace.push(*iteration, action, t, gnorm, TraceMarker::Step);
                scale = t / cfg.shrink;
                if decrease < cfg.tolerance {
                    break;
                }
            }
            None => {
                if retraction_failures == attempts {
                    return Err(Error::StalledAtBoundary {
                        attempts: retraction_failures,
                    });
                }
                break;
            }
        }
    }
    Ok(Descent { psi, action })
}

fn perturb<R: Rng>(space: &KreinSpace, psi: &CMatrix, relative: f64, rng: &mut R) -> Option<(CMatrix, f64)> {
    let (rows, cols) = psi.shape();
    let rms = psi.norm() / ((rows * cols) as f64).sqrt();
    let mut sigma = relative * rms;
    for _ in 0..16 {
        let noise = complex_gaussian_matrix(rows, cols, rng);
        let cand = psi + noise * C64::new(sigma, 0.0);
        if let Ok(q) = orthonormalize(space, &cand) {
            let a = FermionicProjector::from_states(*space, q.clone()).action();
            return Some((q, a));
        }
        sigma *= 0.5;
    }
    None
}

fn anneal<R: Rng>(
    space: &KreinSpace,
    start: &Descent,
    schedule: &AnnealingSchedule,
    rng: &mut R,
    trace: &mut OptimizationTrace,
    iteration: &mut usize,
) -> Descent {
    let mut current = (start.psi.clone(), start.action);
    let mut best = (start.psi.clone(), start.action);
    let mut temperature = schedule.initial_temperature;
    for _ in 0..schedule.steps {
        if let Some((q, a)) = perturb(space, &current.0, schedule.proposal_scale, rng) {
            let delta = a - current.1;
            let u: f64 = rng.random();
            if delta <= 0.0 || u < (-delta / temperature).exp() {
                current = (q, a);
                if a < best.1 {
                    best = (current.0.clone(), a);
                    *iteration += 1;
                    trace.push(*iteration, a, 0.0, 0.0, TraceMarker::Anneal);
                }
            }
        }
        temperature *= schedule.decay;
    }
    Descent {
        psi: best.0,
        action: best.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::krein::SpinSignature;

    fn space(m: usize) -> KreinSpace {
        KreinSpace::new(m, SpinSignature::dirac()).unwrap()
    }

    #[test]
    fn random_feasible_is_orthonormal_and_deterministic() {
        let a = random_feasible(space(1), 2, 11).unwrap();
        assert!(a.is_orthonormal(1e-12));
        let b = random_feasible(space(1), 2, 11).unwrap();
        assert_eq!(a, b);
        let c = random_feasible(space(1), 2, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_feasible_rejects_too_many_particles() {
        assert!(matches!(
            random_feasible(space(1), 3, 0),
            Err(Error::ParticleNumberTooLarge { particles: 3, cone: 2 })
        ));
        assert!(random_feasible(space(1), 0, 0).is_err());
        // saturating the cone still works
        let full = random_feasible(space(3), 6, 5).unwrap();
        assert!(full.is_orthonormal(1e-10));
    }

    #[test]
    fn quadratic_self_test() {
        // f(x) = sum_i (i+1) x_i^2 / 2 + x_0 x_1, gradient known in closed form
        let x = [0.3, -1.2, 2.5];
        let f = |p: &[f64]| {
            Some(
                p.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v / 2.0).sum::<f64>()
                    + p[0] * p[1],
            )
        };
        let g = central_difference(&x, 1e-5, f);
        let exact = [x[0] + x[1], 2.0 * x[1] + x[0], 3.0 * x[2]];
        for (a, b) in g.values.iter().zip(exact) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(g.skipped.is_empty());
    }

    #[test]
    fn infeasible_probes_are_skipped() {
        let g = central_difference(&[0.0, 1.0], 1e-3, |p| if p[0] > 0.0 { None } else { Some(p[1]) });
        assert_eq!(g.skipped, vec![0]);
        assert_eq!(g.values[0], 0.0);
        assert!((g.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn central_difference_is_second_order() {
        let f = |p: &[f64]| Some(p[0].sin() * p[0].exp());
        let exact = 0.7f64.cos() * 0.7f64.exp() + 0.7f64.sin() * 0.7f64.exp();
        let e1 = (central_difference(&[0.7], 1e-2, f).values[0] - exact).abs();
        let e2 = (central_difference(&[0.7], 2e-2, f).values[0] - exact).abs();
        let ratio = e2 / e1;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn single_point_single_particle_gradient_vanishes() {
        let config = random_feasible(space(1), 1, 3).unwrap();
        let g = fd_gradient(&config, 1e-5);
        assert!(g.norm() <= 1e-6, "gradient norm {}", g.norm());
    }

    #[test]
    fn single_point_minimization_returns_immediately() {
        let config = random_feasible(space(1), 1, 3).unwrap();
        let (out, trace) = minimize_action(&config, &MinimizerConfig::default()).unwrap();
        let action = FermionicProjector::from_states(*out.space(), out.into_states()).action();
        assert!((action - 0.75).abs() < 1e-12);
        assert!(trace.entries.len() <= 2);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MinimizerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.shrink = 1.0;
        assert!(cfg.validate().is_err());
        let cfg = MinimizerConfig {
            annealing: Some(AnnealingSchedule {
                decay: 1.5,
                ..AnnealingSchedule::default()
            }),
            ..MinimizerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trace_csv_header() {
        let mut t = OptimizationTrace::default();
        t.push(0, 1.0, 0.0, 0.0, TraceMarker::Start);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,action,step,gradient_norm,marker\n0,"));
        assert!(text.trim_end().ends_with("start"));
    }
}
