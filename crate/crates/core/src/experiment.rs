//! JSON-configured batch experiments.
//!
//! A config names a `kind`, a `params` block for that kind, an optional
//! `seed` and an optional output directory:
//!
//! ```json
//! { "kind": "minimize", "seed": 7, "params": { "points": 1, "particles": 1 } }
//! ```
//!
//! [`run`] writes the kind's CSV/JSON/DOT artifacts plus `manifest.json`.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::causal::{causal_graph, CausalLabel, CausalTolerances};
use crate::error::{Error, Result};
use crate::krein::{KreinSpace, SpinSignature};
use crate::minimizer::{minimize_action, random_feasible, MinimizerConfig};
use crate::mixing::{
    boson_amplitude, collapse_experiment, haar_special_unitary, scaling_experiment, slater_overlap,
    DephasingMode, MixingConfig,
};
use crate::projector::FermionicProjector;
use crate::report::{fmt_f64, write_csv, write_json};
use crate::rng::stream;
use crate::sea::{cone_agreement, SeaParams, SeparationGrid};
use crate::symmetry::{sm_breaking_report, BreakingConfig};

fn four() -> i64 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeParams {
    pub points: i64,
    pub particles: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    #[serde(default)]
    pub minimizer: MinimizerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    pub points: i64,
    pub particles: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    /// Classify a minimizer output instead of a random configuration.
    #[serde(default)]
    pub minimizer: Option<MinimizerConfig>,
    #[serde(default)]
    pub tolerances: CausalTolerances,
}

fn default_symmetry_tol() -> f64 {
    1e-6
}

fn default_samples() -> i64 {
    66
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryParams {
    pub points: i64,
    pub particles: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    #[serde(default)]
    pub minimizer: MinimizerConfig,
    #[serde(default = "default_symmetry_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub samples: i64,
}

fn default_margin() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaConeParams {
    #[serde(default)]
    pub sea: SeaParams,
    #[serde(default)]
    pub grid: SeparationGrid,
    #[serde(default)]
    pub tolerances: CausalTolerances,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn two() -> i64 {
    2
}

fn one() -> i64 {
    1
}

fn default_strips() -> i64 {
    128
}

fn default_trials() -> i64 {
    100
}

fn haar() -> DephasingMode {
    DephasingMode::HaarSpecialUnitary
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixScalingParams {
    pub f_list: Vec<i64>,
    #[serde(default = "two")]
    pub subsystems: i64,
    #[serde(default = "two")]
    pub strip_width: i64,
    #[serde(default = "default_strips")]
    pub strips: i64,
    #[serde(default = "one")]
    pub sites: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    #[serde(default = "default_trials")]
    pub trials: i64,
    #[serde(default = "haar")]
    pub mode: DephasingMode,
}

fn eight() -> i64 {
    8
}

fn default_collapse_trials() -> i64 {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseParams {
    pub l_list: Vec<i64>,
    #[serde(default = "eight")]
    pub particles: i64,
    #[serde(default = "four")]
    pub strips: i64,
    #[serde(default = "one")]
    pub sites: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    #[serde(default = "default_collapse_trials")]
    pub trials: i64,
    #[serde(default = "haar")]
    pub mode: DephasingMode,
}

fn hundred() -> i64 {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlaterParams {
    pub points: i64,
    pub particles: i64,
    #[serde(default = "four")]
    pub spin_dim: i64,
    #[serde(default = "hundred")]
    pub samples: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum ExperimentParams {
    Minimize(MinimizeParams),
    Classify(ClassifyParams),
    Symmetry(SymmetryParams),
    SeaCone(SeaConeParams),
    MixScaling(MixScalingParams),
    Collapse(CollapseParams),
    Slater(SlaterParams),
}

impl ExperimentParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentParams::Minimize(_) => "minimize",
            ExperimentParams::Classify(_) => "classify",
            ExperimentParams::Symmetry(_) => "symmetry",
            ExperimentParams::SeaCone(_) => "sea-cone",
            ExperimentParams::MixScaling(_) => "mix-scaling",
            ExperimentParams::Collapse(_) => "collapse",
            ExperimentParams::Slater(_) => "slater",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, ExperimentParams::SeaCone(_))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct Envelope {
    kind: Value,
    params: Value,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: ExperimentParams,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A config that could not be parsed, with its position in the source.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl From<serde_json::Error> for ConfigError {
    fn from(e: serde_json::Error) -> Self {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        ConfigError {
            message,
            line: e.line(),
            column: e.column(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> std::result::Result<Self, ConfigError> {
        let envelope: Envelope = serde_json::from_str(text)?;
        let params: ExperimentParams = serde_json::from_str(text)?;
        Ok(Self {
            params,
            seed: envelope.seed,
            out: envelope.out,
        })
    }

    pub fn load(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError {
            message: format!("cannot read {}: {e}", path.display()),
            line: 0,
            column: 0,
        })?;
        Self::from_json_str(&text)
    }

    /// The config as JSON, enough to re-run the experiment.
    pub fn to_json(&self) -> Value {
        let mut v = serde_json::to_value(&self.params).expect("params serialize");
        let obj = v.as_object_mut().expect("adjacently tagged object");
        obj.insert("seed".into(), json!(self.seed));
        if let Some(out) = &self.out {
            obj.insert("out".into(), json!(out));
        }
        v
    }

    /// Every schema violation, without running anything.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Violations::default();
        if self.params.is_stochastic() && self.seed.is_none() {
            v.push("seed", "is required for this kind");
        }
        match &self.params {
            ExperimentParams::Minimize(p) => {
                v.system(p.points, p.particles, p.spin_dim);
                v.minimizer("minimizer", &p.minimizer);
            }
            ExperimentParams::Classify(p) => {
                v.system(p.points, p.particles, p.spin_dim);
                if let Some(m) = &p.minimizer {
                    v.minimizer("minimizer", m);
                }
                v.result("tolerances", p.tolerances.validate());
            }
            ExperimentParams::Symmetry(p) => {
                v.system(p.points, p.particles, p.spin_dim);
                v.minimizer("minimizer", &p.minimizer);
                if !(p.tol > 0.0) {
                    v.push("params.tol", format!("must be positive, got {}", p.tol));
                }
                v.at_least("params.samples", p.samples, 1);
            }
            ExperimentParams::SeaCone(p) => {
                v.result("sea", p.sea.validate());
                v.result("grid", p.grid.validate());
                v.result("tolerances", p.tolerances.validate());
                if !(p.margin >= 0.0) {
                    v.push("params.margin", format!("must be nonnegative, got {}", p.margin));
                }
            }
            ExperimentParams::MixScaling(p) => {
                let before = v.0.len();
                v.at_least("params.subsystems", p.subsystems, 1);
                v.at_least("params.strip_width", p.strip_width, 1);
                v.at_least("params.strips", p.strips, 1);
                v.at_least("params.sites", p.sites, 1);
                v.at_least("params.trials", p.trials, 1);
                v.spin("params.spin_dim", p.spin_dim);
                v.ascending("params.f_list", &p.f_list, 4);
                if v.0.len() == before {
                    let cfg = scaling_config(p, 0);
                    for msg in cfg.violations() {
                        v.push("params", msg);
                    }
                    if let Some(&f) = p.f_list.iter().find(|&&f| f as usize > cfg.coarse_dim()) {
                        v.push(
                            "params.f_list",
                            format!("f = {f} exceeds strips * sites * spin_dim = {}", cfg.coarse_dim()),
                        );
                    }
                }
            }
            ExperimentParams::Collapse(p) => {
                let before = v.0.len();
                v.at_least("params.particles", p.particles, 1);
                v.at_least("params.strips", p.strips, 1);
                v.at_least("params.sites", p.sites, 1);
                v.at_least("params.trials", p.trials, 1);
                v.spin("params.spin_dim", p.spin_dim);
                v.ascending("params.l_list", &p.l_list, 1);
                if v.0.len() == before {
                    let cfg = collapse_config(p, 0);
                    if p.particles as usize > cfg.coarse_dim() {
                        v.push(
                            "params.particles",
                            format!("{} exceeds strips * sites * spin_dim = {}", p.particles, cfg.coarse_dim()),
                        );
                    }
                }
            }
            ExperimentParams::Slater(p) => {
                v.system(p.points, p.particles, p.spin_dim);
                v.at_least("params.samples", p.samples, 1);
            }
        }
        v.0
    }
}

#[derive(Default)]
struct Violations(Vec<String>);

impl Violations {
    fn push(&mut self, field: &str, msg: impl fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    fn at_least(&mut self, field: &str, value: i64, min: i64) {
        if value < min {
            self.push(field, format!("must be at least {min}, got {value}"));
        }
    }

    fn spin(&mut self, field: &str, value: i64) {
        if value != 2 && value != 4 {
            self.push(field, format!("must be 2 or 4, got {value}"));
        }
    }

    fn system(&mut self, points: i64, particles: i64, spin_dim: i64) {
        self.at_least("params.points", points, 1);
        self.at_least("params.particles", particles, 1);
        self.spin("params.spin_dim", spin_dim);
        if points >= 1 && particles >= 1 && (spin_dim == 2 || spin_dim == 4) {
            let cone = points * spin_dim / 2;
            if particles > cone {
                self.push(
                    "params.particles",
                    format!("{particles} exceeds the negative cone dimension {cone}"),
                );
            }
        }
    }

    fn minimizer(&mut self, field: &str, cfg: &MinimizerConfig) {
        self.result(field, cfg.validate());
    }

    fn result(&mut self, field: &str, r: Result<()>) {
        if let Err(e) = r {
            self.push(&format!("params.{field}"), e);
        }
    }

    fn ascending(&mut self, field: &str, list: &[i64], min_len: usize) {
        if list.len() < min_len {
            self.push(field, format!("needs at least {min_len} values, got {}", list.len()));
        }
        if let Some(&bad) = list.iter().find(|&&x| x < 1) {
            self.push(field, format!("values must be at least 1, got {bad}"));
        }
        if list.windows(2).any(|w| w[0] >= w[1]) {
            self.push(field, "values must be strictly ascending");
        }
    }
}

fn space(points: i64, spin_dim: i64) -> Result<KreinSpace> {
    KreinSpace::new(points as usize, SpinSignature::new(spin_dim as usize)?)
}

fn scaling_config(p: &MixScalingParams, seed: u64) -> MixingConfig {
    MixingConfig {
        particles: p.f_list.first().copied().unwrap_or(1).max(1) as usize,
        subsystems: p.subsystems as usize,
        mode: p.mode,
        trials: p.trials as usize,
        seed,
        strip_width: p.strip_width as usize,
        strips: p.strips as usize,
        sites: p.sites as usize,
        spin_dim: p.spin_dim as usize,
    }
}

fn collapse_config(p: &CollapseParams, seed: u64) -> MixingConfig {
    MixingConfig {
        particles: p.particles as usize,
        subsystems: 1,
        mode: p.mode,
        trials: p.trials as usize,
        seed,
        strip_width: 1,
        strips: p.strips as usize,
        sites: p.sites as usize,
        spin_dim: p.spin_dim as usize,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub kind: String,
    pub config: Value,
    pub version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
    pub summary: Value,
}

struct Output<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Output<'_> {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        self.artifacts.push(name.to_string());
        write_json(&self.dir.join(name), value)
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.artifacts.push(name.to_string());
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

/// Run a validated config and write its artifacts and `manifest.json` into
/// `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest> {
    let violations = config.violations();
    if !violations.is_empty() {
        return Err(Error::InvalidParameter(violations.join("; ")));
    }
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let seed = config.seed.unwrap_or(0);
    let mut out = Output {
        dir: out_dir,
        artifacts: Vec::new(),
    };
    let summary = match &config.params {
        ExperimentParams::Minimize(p) => run_minimize(p, seed, &mut out)?,
        ExperimentParams::Classify(p) => run_classify(p, seed, &mut out)?,
        ExperimentParams::Symmetry(p) => run_symmetry(p, seed, &mut out)?,
        ExperimentParams::SeaCone(p) => run_sea_cone(p, &mut out)?,
        ExperimentParams::MixScaling(p) => run_mix_scaling(p, seed, &mut out)?,
        ExperimentParams::Collapse(p) => run_collapse(p, seed, &mut out)?,
        ExperimentParams::Slater(p) => run_slater(p, seed, &mut out)?,
    };
    let manifest = Manifest {
        kind: config.params.kind().to_string(),
        config: config.to_json(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        artifacts: out.artifacts,
        summary,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn minimized(
    points: i64,
    particles: i64,
    spin_dim: i64,
    minimizer: &MinimizerConfig,
    seed: u64,
    out: &mut Output,
) -> Result<(FermionicProjector, Value)> {
    let start = random_feasible(space(points, spin_dim)?, particles as usize, seed)?;
    let cfg = MinimizerConfig {
        seed,
        ..minimizer.clone()
    };
    let (best, trace) = minimize_action(&start, &cfg)?;
    trace.write_csv(out.file("trace.csv")?)?;
    let p = FermionicProjector::from_states(*best.space(), best.into_states());
    let summary = json!({
        "initial_action": trace.initial_action(),
        "final_action": p.action(),
        "trace_entries": trace.entries.len(),
        "skipped_coordinates": trace.skipped_coordinates,
    });
    Ok((p, summary))
}

fn run_minimize(p: &MinimizeParams, seed: u64, out: &mut Output) -> Result<Value> {
    let (_, summary) = minimized(p.points, p.particles, p.spin_dim, &p.minimizer, seed, out)?;
    out.json("result.json", &summary)?;
    Ok(summary)
}

fn run_classify(p: &ClassifyParams, seed: u64, out: &mut Output) -> Result<Value> {
    let proj = match &p.minimizer {
        Some(m) => minimized(p.points, p.particles, p.spin_dim, m, seed, out)?.0,
        None => {
            let c = random_feasible(space(p.points, p.spin_dim)?, p.particles as usize, seed)?;
            FermionicProjector::from_states(*c.space(), c.into_states())
        }
    };
    let graph = causal_graph(&proj, &p.tolerances);
    graph.write_csv(out.file("pairs.csv")?)?;
    out.text("graph.dot", &graph.to_dot())?;
    Ok(json!({
        "action": proj.action(),
        "timelike": graph.count(CausalLabel::Timelike),
        "spacelike": graph.count(CausalLabel::Spacelike),
        "lightlike": graph.count(CausalLabel::Lightlike),
    }))
}

fn run_symmetry(p: &SymmetryParams, seed: u64, out: &mut Output) -> Result<Value> {
    let (proj, mut summary) = minimized(p.points, p.particles, p.spin_dim, &p.minimizer, seed, out)?;
    let report = sm_breaking_report(
        &proj,
        &BreakingConfig {
            tol: p.tol,
            samples: p.samples as usize,
            seed,
        },
    )?;
    out.json("symmetry.json", &report.to_json())?;
    let obj = summary.as_object_mut().expect("summary object");
    obj.insert("ruled_out".into(), json!(report.ruled_out));
    obj.insert("transpositions".into(), json!(report.verdicts.len()));
    obj.insert("sm_ruled_out".into(), json!(report.sm_ruled_out));
    Ok(summary)
}

fn run_sea_cone(p: &SeaConeParams, out: &mut Output) -> Result<Value> {
    let report = cone_agreement(&p.sea, &p.grid, &p.tolerances, p.margin)?;
    report.write_heatmap(out.file("heatmap.csv")?)?;
    Ok(json!({
        "agreement": report.agreement,
        "evaluated": report.samples.len(),
        "excluded": report.excluded,
    }))
}

fn run_mix_scaling(p: &MixScalingParams, seed: u64, out: &mut Output) -> Result<Value> {
    let f_list: Vec<usize> = p.f_list.iter().map(|&f| f as usize).collect();
    let report = scaling_experiment(&scaling_config(p, seed), &f_list)?;
    report.write_csv(out.file("scaling.csv")?)?;
    let fit = serde_json::to_value(&report.fit).expect("fit serializes");
    out.json("fit.json", &fit)?;
    Ok(json!({ "fit": fit }))
}

fn run_collapse(p: &CollapseParams, seed: u64, out: &mut Output) -> Result<Value> {
    let l_list: Vec<usize> = p.l_list.iter().map(|&l| l as usize).collect();
    let report = collapse_experiment(&collapse_config(p, seed), &l_list, p.particles as usize)?;
    report.write_csv(out.file("collapse.csv")?)?;
    let summary = json!({
        "monotone": report.monotone,
        "exponent": report.exponent(),
        "fit": report.fit,
    });
    out.json("fit.json", &summary)?;
    Ok(summary)
}

fn run_slater(p: &SlaterParams, seed: u64, out: &mut Output) -> Result<Value> {
    let s = space(p.points, p.spin_dim)?;
    let f = p.particles as usize;
    let mut rows = Vec::with_capacity(p.samples as usize);
    let mut max_dev: f64 = 0.0;
    for i in 0..p.samples as usize {
        let mut rng = stream(seed, i as u64);
        let psi = random_feasible(s, f, rng.next_u64())?;
        let u = haar_special_unitary(f, &mut rng);
        let mixed = psi.transformed(&u)?;
        let reference = slater_overlap(&psi, &psi)?;
        let overlap = slater_overlap(&psi, &mixed)?;
        let amplitude = boson_amplitude(&mixed, &psi, None, 1e-8)?.amplitude;
        let dev = (overlap - reference).norm();
        max_dev = max_dev.max(dev);
        rows.push(vec![
            i.to_string(),
            fmt_f64(overlap.re),
            fmt_f64(overlap.im),
            fmt_f64(reference.re),
            fmt_f64(reference.im),
            fmt_f64(amplitude.re),
            fmt_f64(amplitude.im),
            fmt_f64(dev),
        ]);
    }
    let header: Vec<String> = [
        "sample",
        "overlap_re",
        "overlap_im",
        "reference_re",
        "reference_im",
        "amplitude_re",
        "amplitude_im",
        "deviation",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_csv(out.file("slater.csv")?, &header, rows)?;
    Ok(json!({ "max_deviation": max_dev }))
}
