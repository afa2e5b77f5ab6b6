//! Config-driven experiments with CSV output.
//!
//! A run resolves an [`ExperimentConfig`] (filling per-kind defaults),
//! executes it, and writes one CSV whose `#` comment header records the
//! software version, the resolved config as JSON, its SHA-256 and the
//! master seed. Bodies depend only on the resolved config: every random
//! draw comes from keyed streams, so the thread count does not matter.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::couplings::{run_coupled_ensemble, CouplingConfig, CouplingKind};
use crate::diagnostics::bounds::TailConstants;
use crate::diagnostics::{linear_fit, loglog_slope, wasserstein1, SampleCloud};
use crate::error::{invalid, Error, Result};
use crate::lemma_lab::distance::{triangle_suite, two_point_suite, DistanceOptions};
use crate::lemma_lab::jacobi::{jacobi_suite, SuiteOptions};
use crate::lemma_lab::matrix_ode::matrix_ode_suite;
use crate::lemma_lab::{lyapunov_suite, Check};
use crate::lyapunov::{LyapunovParams, PsiScale};
use crate::manifolds::Manifold;
use crate::noise::{derive_seed, keyed_rng, Stream};
use crate::potentials::{sample_region, Potential, PotentialSpec, Region, StochasticGradOracle, VonMisesFisher};
use crate::samplers::{
    adjacent_level_error_table, one_step_error_table, run_langevin, run_sgld, ChainConfig, StepsizeGuard,
};
use crate::scans::{centered_anchors, gaussian_gap, sgld_gap_table, summarize_w1, tail_check, w1_stepsize_table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Columns of the scan tables.
pub const SCAN_COLUMNS: [&str; 9] =
    ["experiment", "manifold", "target", "T_or_delta", "level", "rep", "value", "stderr", "seed"];
pub const COUPLING_COLUMNS: [&str; 5] = ["pair_id", "k", "t", "distance", "lyapunov_value"];
pub const LEMMA_COLUMNS: [&str; 6] = ["check", "evaluations", "violations", "worst_slack", "worst_trial", "passed"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    Sgld,
    OneStepError,
    AdjacentLevel,
    Coupling,
    W1Scaling,
    SgldBias,
    LemmaCheck,
    TailCheck,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::Sgld => "sgld",
            ExperimentKind::OneStepError => "one-step-error",
            ExperimentKind::AdjacentLevel => "adjacent-level",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::W1Scaling => "w1-scaling",
            ExperimentKind::SgldBias => "sgld-bias",
            ExperimentKind::LemmaCheck => "lemma-check",
            ExperimentKind::TailCheck => "tail-check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaSuite {
    Lyapunov,
    Jacobi,
    MatrixOde,
    Triangle,
    TwoPoint,
}

impl LemmaSuite {
    pub fn name(&self) -> &'static str {
        match self {
            LemmaSuite::Lyapunov => "lyapunov",
            LemmaSuite::Jacobi => "jacobi",
            LemmaSuite::MatrixOde => "matrix-ode",
            LemmaSuite::Triangle => "triangle",
            LemmaSuite::TwoPoint => "two-point",
        }
    }
}

/// Finite-sum target `(1/N) sum c/2 |x - a_i|^2` on `R^dim`. Anchors are
/// given explicitly or drawn (centered) from `N(0, scale^2 I)` with
/// `anchor_seed`, independent of the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub c: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub anchor_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Vec<f64>>,
}

fn default_count() -> usize {
    10
}

fn default_dim() -> usize {
    4
}

fn default_scale() -> f64 {
    1.0
}

impl Default for AnchorSpec {
    fn default() -> Self {
        Self { c: 1.0, count: 10, dim: 4, scale: 1.0, anchor_seed: 0, anchors: Vec::new() }
    }
}

impl AnchorSpec {
    pub fn anchors(&self) -> Vec<Vec<f64>> {
        if self.anchors.is_empty() {
            centered_anchors(self.count, self.dim, self.scale, self.anchor_seed)
        } else {
            self.anchors.clone()
        }
    }

    pub fn oracle(&self) -> Result<StochasticGradOracle> {
        if !(self.c > 0.0) {
            return Err(Error::Config("anchors.c must be positive".into()));
        }
        let a = self.anchors();
        if a.is_empty() || a.iter().any(|x| x.len() != a[0].len() || x.is_empty()) {
            return Err(Error::Config("anchors must be nonempty vectors of equal length".into()));
        }
        StochasticGradOracle::gaussian_anchors(self.c, &a)
    }
}

/// Everything an experiment reads. Unset fields take per-kind defaults in
/// [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Stepsizes `delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stepsizes: Option<Vec<f64>>,
    /// Number of steps `K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Horizon `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Horizons for the one-step table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<u32>,
    /// Replicates, chains, pairs or seeds depending on the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Cloud size for the W1 scan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<LemmaSuite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_r_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_scale: Option<PsiScale>,
    /// Target level of the tail bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<StepsizeGuard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<Manifold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<AnchorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovParams>,
}

fn dyadic(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

fn vmf(kappa: f64) -> PotentialSpec {
    PotentialSpec::Vmf { kappa, mu: vec![0.0, 0.0, 1.0] }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            stepsizes: None,
            steps: None,
            horizon: None,
            horizons: None,
            levels: None,
            i_max: None,
            reps: None,
            samples: None,
            trials: None,
            suite: None,
            l_r_override: None,
            psi_scale: None,
            tail_level: None,
            guard: None,
            initial: None,
            output: None,
            manifold: None,
            potential: None,
            anchors: None,
            coupling: None,
            lyapunov: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Fill per-kind defaults and validate.
    pub fn resolve(&self) -> Result<Self> {
        use ExperimentKind::*;
        let mut c = self.clone();
        let needs_potential = matches!(c.experiment, Sample | OneStepError | AdjacentLevel | Coupling | W1Scaling);
        let needs_anchors = matches!(c.experiment, Sgld | SgldBias | TailCheck);
        if needs_potential && c.potential.is_none() {
            c.potential = Some(match c.experiment {
                OneStepError | AdjacentLevel => vmf(1.0),
                Coupling => vmf(10.0),
                _ => vmf(4.0),
            });
        }
        if needs_anchors && c.anchors.is_none() {
            c.anchors = Some(AnchorSpec::default());
        }
        let fill_f = |v: &mut Option<f64>, d: f64| {
            v.get_or_insert(d);
        };
        let fill_u = |v: &mut Option<usize>, d: usize| {
            v.get_or_insert(d);
        };
        match c.experiment {
            Sample | Sgld => {
                c.stepsizes.get_or_insert_with(|| vec![0.01]);
                fill_u(&mut c.steps, 1000);
                fill_u(&mut c.reps, 512);
            }
            OneStepError => {
                c.horizons.get_or_insert_with(|| dyadic(2, 6));
                c.i_max.get_or_insert(9);
                fill_u(&mut c.reps, 2000);
                c.initial.get_or_insert_with(|| vec![1.0, 0.0, 0.0]);
            }
            AdjacentLevel => {
                fill_f(&mut c.horizon, 0.25);
                c.levels.get_or_insert_with(|| (2..=8).collect());
                fill_u(&mut c.reps, 400);
                c.initial.get_or_insert_with(|| vec![1.0, 0.0, 0.0]);
            }
            Coupling => {
                c.coupling.get_or_insert_with(CouplingKind::reflection);
                c.stepsizes.get_or_insert_with(|| vec![0.005]);
                fill_u(&mut c.steps, 2000);
                fill_u(&mut c.reps, 50);
            }
            W1Scaling => {
                fill_f(&mut c.horizon, 8.0);
                c.stepsizes.get_or_insert_with(|| [dyadic(4, 8), dyadic(10, 10)].concat());
                fill_u(&mut c.samples, 512);
                fill_u(&mut c.reps, 16);
            }
            SgldBias => {
                fill_f(&mut c.horizon, 16.0);
                c.stepsizes.get_or_insert_with(|| dyadic(3, 7));
                fill_u(&mut c.reps, 400);
            }
            LemmaCheck => {
                let suite = *c.suite.get_or_insert(LemmaSuite::Jacobi);
                if matches!(suite, LemmaSuite::Jacobi | LemmaSuite::Triangle | LemmaSuite::TwoPoint) {
                    c.manifold.get_or_insert(Manifold::sphere(3));
                }
                if suite == LemmaSuite::Lyapunov {
                    c.psi_scale.get_or_insert(PsiScale::Full);
                }
                fill_u(&mut c.trials, if suite == LemmaSuite::Lyapunov { 50 } else { 1000 });
            }
            TailCheck => {
                c.stepsizes.get_or_insert_with(|| vec![0.01]);
                fill_u(&mut c.steps, 10_000);
                fill_u(&mut c.reps, 500);
                fill_f(&mut c.tail_level, 0.01);
            }
        }
        if needs_potential || needs_anchors {
            c.guard.get_or_insert(if needs_anchors { StepsizeGuard::Warn } else { StepsizeGuard::Enforce });
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if let Some(s) = &self.stepsizes {
            if s.is_empty() || s.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return bad("stepsizes must be a nonempty list of positive numbers");
            }
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() || h.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return bad("horizons must be a nonempty list of positive numbers");
            }
        }
        if self.horizon.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            return bad("horizon must be positive");
        }
        if self.reps == Some(0) || self.samples == Some(0) || self.trials == Some(0) {
            return bad("reps, samples and trials must be positive");
        }
        if self.i_max.is_some_and(|i| i > 14) || self.levels.as_ref().is_some_and(|l| l.iter().any(|&i| i >= 14)) {
            return bad("levels are limited to 14");
        }
        if self.tail_level.is_some_and(|l| !(l > 0.0 && l < 1.0)) {
            return bad("tail_level must lie in (0, 1)");
        }
        if let Some(CouplingKind::Reflection { threshold }) = self.coupling {
            if !(threshold >= 0.0) {
                return bad("reflection threshold must be nonnegative");
            }
        }
        if let Some(p) = &self.lyapunov {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let (Some(m), Some(p)) = (&self.manifold, &self.potential) {
            if p.build()?.manifold() != *m {
                return bad("manifold does not match the potential");
            }
        }
        Ok(())
    }

    /// SHA-256 of the JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configs serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Output file name: the configured name, or `<kind>.csv` (with the
    /// suite for lemma checks).
    pub fn file_name(&self) -> String {
        if let Some(name) = self.output.as_ref().and_then(|p| p.file_name()) {
            return name.to_string_lossy().into_owned();
        }
        match (self.experiment, self.suite) {
            (ExperimentKind::LemmaCheck, Some(s)) => format!("lemma-check-{}.csv", s.name()),
            (k, _) => format!("{}.csv", k.name()),
        }
    }

    /// Output path with `dir` replacing the configured directory.
    pub fn output_path(&self, dir: Option<&Path>) -> PathBuf {
        let base = match dir {
            Some(d) => d.to_path_buf(),
            None => self
                .output
                .as_ref()
                .and_then(|p| p.parent())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from(".")),
        };
        base.join(self.file_name())
    }
}

/// Rows with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Output {
    Table(Table),
    /// Final points, one per chain, readable by [`SampleCloud::read_csv`].
    Cloud(SampleCloud),
}

fn manifold_label(m: &Manifold) -> String {
    match m {
        Manifold::Euclidean { dim } => format!("R^{dim}"),
        Manifold::Sphere { ambient_dim } => format!("S^{}", ambient_dim - 1),
        Manifold::Hyperboloid { dim } => format!("H^{dim}"),
    }
}

struct ScanRows<'a> {
    table: Table,
    manifold: String,
    target: String,
    seed: &'a str,
}

impl ScanRows<'_> {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, exp: &str, x: f64, level: Option<u32>, rep: Option<usize>, value: f64, stderr: f64) {
        let opt = |v: Option<String>| v.unwrap_or_default();
        self.table.rows.push(vec![
            exp.to_string(),
            self.manifold.clone(),
            self.target.clone(),
            x.to_string(),
            opt(level.map(|l| l.to_string())),
            opt(rep.map(|r| r.to_string())),
            value.to_string(),
            if stderr.is_nan() { String::new() } else { stderr.to_string() },
            self.seed.to_string(),
        ]);
    }
}

fn potential_of(c: &ExperimentConfig) -> Result<std::sync::Arc<dyn Potential>> {
    c.potential.as_ref().ok_or_else(|| Error::Config("missing potential".into()))?.build()
}

fn initial_of(c: &ExperimentConfig, p: &dyn Potential) -> Vec<f64> {
    c.initial.clone().or_else(|| p.stationary_point()).unwrap_or_else(|| p.manifold().base_point())
}

fn one<T: Copy>(v: &Option<Vec<T>>, what: &str) -> Result<T> {
    match v.as_deref() {
        Some([x]) => Ok(*x),
        _ => Err(Error::Config(format!("this experiment takes exactly one {what}"))),
    }
}

/// Execute a resolved config.
pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    use ExperimentKind::*;
    let c = cfg;
    let seed_str = c.seed.to_string();
    let steps = c.steps.unwrap_or(0);
    let reps = c.reps.unwrap_or(1);
    let guard = c.guard.unwrap_or_default();
    match c.experiment {
        Sample | Sgld => {
            let delta = one(&c.stepsizes, "stepsize")?;
            let (m, points) = if c.experiment == Sample {
                let p = potential_of(c)?;
                let x0 = initial_of(c, p.as_ref());
                let pts = chains(reps, |r| {
                    let cfg = chain_cfg(c.seed, r, delta, steps, &x0, guard);
                    Ok(run_langevin(p.as_ref(), &cfg)?.last().to_vec())
                })?;
                (p.manifold(), pts)
            } else {
                let o = anchors_of(c)?.oracle()?;
                let x0 = c.initial.clone().unwrap_or_else(|| vec![0.0; o.sum.manifold().ambient_dim()]);
                let pts = chains(reps, |r| {
                    let cfg = chain_cfg(c.seed, r, delta, steps, &x0, guard);
                    Ok(run_sgld(&o, &cfg)?.last().to_vec())
                })?;
                (o.sum.manifold(), pts)
            };
            Ok(Output::Cloud(SampleCloud::new(m, points)?))
        }
        OneStepError | AdjacentLevel | W1Scaling => {
            let p = potential_of(c)?;
            let mut out = ScanRows {
                table: Table::new(&SCAN_COLUMNS),
                manifold: manifold_label(&p.manifold()),
                target: p.label(),
                seed: &seed_str,
            };
            match c.experiment {
                OneStepError => {
                    let x0 = initial_of(c, p.as_ref());
                    let i_max = c.i_max.unwrap_or(9);
                    let horizons = c.horizons.clone().unwrap_or_default();
                    for r in one_step_error_table(p.as_ref(), &x0, &horizons, i_max, reps, c.seed)? {
                        out.push("one-step-error", r.x, Some(i_max), None, r.mean, r.stderr);
                    }
                }
                AdjacentLevel => {
                    let x0 = initial_of(c, p.as_ref());
                    let t = c.horizon.unwrap_or(0.25);
                    let levels = c.levels.clone().unwrap_or_default();
                    for r in adjacent_level_error_table(p.as_ref(), &x0, t, &levels, reps, c.seed)? {
                        out.push("adjacent-level", t, Some(r.level), None, r.mean, r.stderr);
                        out.push("adjacent-level-nodes", t, Some(r.level), None, r.node_mean, r.node_stderr);
                    }
                }
                _ => {
                    let Some(PotentialSpec::Vmf { kappa, mu }) = &c.potential else {
                        return Err(Error::Config("w1-scaling needs a vmf potential (exact reference)".into()));
                    };
                    let v = VonMisesFisher::new(*kappa, mu.clone())?;
                    let deltas = c.stepsizes.clone().unwrap_or_default();
                    let n = c.samples.unwrap_or(512);
                    let rows = w1_stepsize_table(&v, c.horizon.unwrap_or(8.0), &deltas, n, reps, c.seed)?;
                    for r in &rows {
                        out.push("w1", r.delta, Some(r.level), None, r.w1, r.stderr);
                    }
                    for r in &rows {
                        out.push("w1-excess", r.delta, Some(r.level), None, r.excess, r.excess_stderr);
                    }
                    if summarize_w1(&rows).fit.is_none() {
                        log::warn!("w1 excess is not positive at every stepsize; no slope fitted");
                    }
                }
            }
            Ok(Output::Table(out.table))
        }
        SgldBias | TailCheck => {
            let spec = anchors_of(c)?;
            let o = spec.oracle()?;
            let m = o.sum.manifold();
            let mut out = ScanRows {
                table: Table::new(&SCAN_COLUMNS),
                manifold: manifold_label(&m),
                target: format!("gaussian-anchors(c={},n={})", spec.c, o.len()),
                seed: &seed_str,
            };
            let x0 = c.initial.clone().unwrap_or_else(|| vec![0.0; m.ambient_dim()]);
            if c.experiment == SgldBias {
                let deltas = c.stepsizes.clone().unwrap_or_default();
                let rows = sgld_gap_table(&o, &x0, c.horizon.unwrap_or(16.0), &deltas, reps, c.seed)?;
                let anchors = spec.anchors();
                for r in &rows {
                    out.push("sgld-bias", r.delta, None, None, r.gap, r.stderr);
                }
                for r in &rows {
                    out.push("sgld-bias-exact", r.delta, None, None, gaussian_gap(spec.c, &anchors, r.delta, r.steps), f64::NAN);
                }
            } else {
                let delta = one(&c.stepsizes, "stepsize")?;
                let x_star = o.sum.stationary_point().unwrap_or_else(|| vec![0.0; m.ambient_dim()]);
                let constants = TailConstants {
                    m: spec.c / 2.0,
                    l_beta: spec.c / 2.0,
                    radius: 0.0,
                    l_r: 0.0,
                    d: m.intrinsic_dim() as f64,
                    sigma: o.sigma,
                };
                let level = c.tail_level.unwrap_or(0.01);
                let rep = tail_check(&o, &constants, &x_star, steps, delta, level, reps, c.seed)?;
                out.push("tail-check-observed", delta, None, None, rep.observed.fraction, rep.observed.stderr);
                let bse = (rep.bound.min(1.0) * (1.0 - rep.bound.min(1.0)) / reps as f64).sqrt();
                out.push("tail-check-bound", delta, None, None, rep.bound, bse);
                out.push("tail-check-radius", delta, None, None, rep.radius, f64::NAN);
                out.push("tail-check-max-distance", delta, None, None, rep.max_distance, f64::NAN);
                out.push("tail-check-max-stepsize", delta, None, None, rep.max_stepsize, f64::NAN);
            }
            Ok(Output::Table(out.table))
        }
        Coupling => {
            let p = potential_of(c)?;
            let m = p.manifold();
            let delta = one(&c.stepsizes, "stepsize")?;
            let kind = c.coupling.unwrap_or_else(CouplingKind::reflection);
            let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..reps as u64)
                .map(|i| {
                    let mut rng = keyed_rng(c.seed, Stream::Pairs, i, 0);
                    (sample_region(&m, &Region::Default, &mut rng), sample_region(&m, &Region::Default, &mut rng))
                })
                .collect();
            let ccfg = CouplingConfig { kind, stepsize: delta, steps, seed: c.seed, guard, lyapunov: c.lyapunov };
            let series = run_coupled_ensemble(p.as_ref(), &ccfg, &pairs)?;
            let mut t = Table::new(&COUPLING_COLUMNS);
            for (i, s) in series.iter().enumerate() {
                for (k, d) in s.distances.iter().enumerate() {
                    let f = s.lyapunov.as_ref().map(|f| f[k].to_string()).unwrap_or_default();
                    t.rows.push(vec![i.to_string(), k.to_string(), (k as f64 * delta).to_string(), d.to_string(), f]);
                }
            }
            Ok(Output::Table(t))
        }
        LemmaCheck => {
            let suite = c.suite.unwrap_or(LemmaSuite::Jacobi);
            let trials = c.trials.unwrap_or(1000);
            let manifold = || {
                let m = c.manifold.unwrap_or(Manifold::sphere(3));
                if matches!(m, Manifold::Euclidean { .. }) {
                    return Err(Error::Config("lemma suites run on spheres and hyperboloids".into()));
                }
                Ok(m)
            };
            let checks: Vec<Check> = match suite {
                LemmaSuite::Lyapunov => lyapunov_suite(trials, 2000, c.psi_scale.unwrap_or_default(), c.seed)?,
                LemmaSuite::MatrixOde => matrix_ode_suite(trials, 3, c.seed)?,
                LemmaSuite::Jacobi => {
                    jacobi_suite(&manifold()?, trials, 1.0, c.seed, SuiteOptions { l_r_override: c.l_r_override })?
                }
                LemmaSuite::Triangle => triangle_suite(
                    &manifold()?,
                    trials,
                    c.seed,
                    DistanceOptions { l_r_override: c.l_r_override, ..Default::default() },
                )?,
                LemmaSuite::TwoPoint => two_point_suite(
                    &manifold()?,
                    trials,
                    0.5,
                    c.seed,
                    DistanceOptions { l_r_override: c.l_r_override, ..Default::default() },
                )?,
            };
            let mut t = Table::new(&LEMMA_COLUMNS);
            for ch in checks {
                t.rows.push(vec![
                    ch.name.clone(),
                    ch.evaluations.to_string(),
                    ch.violations.to_string(),
                    ch.worst_slack.to_string(),
                    ch.worst_trial.to_string(),
                    ch.passed().to_string(),
                ]);
            }
            Ok(Output::Table(t))
        }
    }
}

fn anchors_of(c: &ExperimentConfig) -> Result<&AnchorSpec> {
    c.anchors.as_ref().ok_or_else(|| Error::Config("missing anchors".into()))
}

fn chain_cfg(seed: u64, r: usize, delta: f64, steps: usize, x0: &[f64], guard: StepsizeGuard) -> ChainConfig {
    ChainConfig {
        stepsize: delta,
        steps,
        seed: derive_seed(seed, Stream::Replicate, r as u64, 0),
        initial: x0.to_vec(),
        record_frames: false,
        guard,
    }
}

fn chains<F>(reps: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

/// Render the CSV, header comments included.
pub fn render(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let json = serde_json::to_string(cfg).map_err(|e| invalid(e.to_string()))?;
    writeln!(buf, "# manifold-langevin {VERSION}")?;
    writeln!(buf, "# config: {json}")?;
    writeln!(buf, "# config-sha256: {}", cfg.hash())?;
    writeln!(buf, "# seed: {}", cfg.seed)?;
    match out {
        Output::Cloud(cloud) => cloud.write_csv(&mut buf)?,
        Output::Table(t) => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&t.header)?;
            for r in &t.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(buf)
}

/// Lines after the `#` comment header.
pub fn csv_body(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

/// Write `bytes` to `path` through a temporary sibling and a rename, so a
/// failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| invalid("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

/// Resolve, run, and write. Returns the path written.
pub fn run_to_file(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<PathBuf> {
    let cfg = cfg.resolve()?;
    let out = run(&cfg)?;
    let bytes = render(&cfg, &out)?;
    let path = cfg.output_path(dir);
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Run `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// `W1` between two cloud files and the matched pairs as CSV
/// (`row, col, distance`).
pub fn w1_between_files(a: &Path, b: &Path) -> Result<(f64, Vec<u8>)> {
    let ca = SampleCloud::read_csv(fs::File::open(a)?)?;
    let cb = SampleCloud::read_csv(fs::File::open(b)?)?;
    let res = wasserstein1(&ca, &cb)?;
    let mut buf = Vec::new();
    writeln!(buf, "# manifold-langevin {VERSION}")?;
    writeln!(buf, "# w1: {}", res.value)?;
    writeln!(buf, "# cost-matrix-checksum: {}", res.cost_matrix_checksum)?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["row", "col", "distance"])?;
        for (i, &j) in res.assignment.col_of_row.iter().enumerate() {
            let d = ca.manifold.dist(&ca.points[i], &cb.points[j]);
            w.write_record([i.to_string(), j.to_string(), d.to_string()])?;
        }
        w.flush()?;
    }
    Ok((res.value, buf))
}

/// Machine-readable failure record.
pub fn error_record(e: &Error) -> String {
    serde_json::json!({ "status": "error", "kind": e.kind(), "message": e.to_string() }).to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    Info,
    NoData,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
            Status::NoData => "NO DATA",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryLine {
    pub source: String,
    pub quantity: String,
    pub measured: String,
    pub criterion: String,
    pub status: Status,
}

fn line(source: &str, quantity: &str, measured: String, criterion: &str, status: Status) -> SummaryLine {
    SummaryLine {
        source: source.into(),
        quantity: quantity.into(),
        measured,
        criterion: criterion.into(),
        status,
    }
}

fn parse_f(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

/// Pass/fail lines for one CSV produced by [`run_to_file`], or a single
/// "no data" line when it has no rows.
pub fn summarize(source: &str, text: &str) -> Result<Vec<SummaryLine>> {
    let body = csv_body(text.as_bytes());
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(body.as_bytes());
    let header: Vec<String> = match rd.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(_) => Vec::new(),
    };
    let rows: Vec<csv::StringRecord> = rd.records().collect::<std::result::Result<_, _>>()?;
    if header.is_empty() || header == [""] || rows.is_empty() {
        return Ok(vec![line(source, "rows", "0".into(), "at least one row", Status::NoData)]);
    }
    let col = |name: &str| header.iter().position(|h| h == name);
    if header == SCAN_COLUMNS {
        return Ok(summarize_scan(source, &rows));
    }
    if header == LEMMA_COLUMNS {
        return Ok(rows
            .iter()
            .map(|r| {
                let v: usize = r.get(2).and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
                let ev = r.get(1).unwrap_or("");
                let slack = r.get(3).unwrap_or("");
                line(source, r.get(0).unwrap_or(""), format!("{v} of {ev} violated, worst slack {slack}"), "no violations at slack 1e-6", Status::from_bool(v == 0))
            })
            .collect());
    }
    if header == COUPLING_COLUMNS {
        let (kc, dc, fc) = (col("k").unwrap(), col("distance").unwrap(), col("lyapunov_value").unwrap());
        let mut lines = Vec::new();
        for (ci, name) in [(dc, "E d"), (fc, "E f(d)")] {
            let mut sums: Vec<(f64, usize)> = Vec::new();
            for r in &rows {
                let (Some(k), Some(v)) = (r.get(kc).and_then(|s| s.parse::<usize>().ok()), r.get(ci).and_then(parse_f)) else {
                    continue;
                };
                if sums.len() <= k {
                    sums.resize(k + 1, (0.0, 0));
                }
                sums[k].0 += v;
                sums[k].1 += 1;
            }
            let means: Vec<f64> = sums.iter().filter(|s| s.1 > 0).map(|s| s.0 / s.1 as f64).collect();
            if means.len() < 4 {
                continue;
            }
            // Trend of the ensemble mean against the step index over the second half.
            let half = means.len() / 2;
            let ks: Vec<f64> = (half..means.len()).map(|k| k as f64).collect();
            let ms = &means[half..];
            match linear_fit(&ks, ms) {
                Ok(fit) => lines.push(line(
                    source,
                    &format!("{name} trend per step"),
                    format!("{:.3e} (start {:.4}, end {:.4})", fit.slope, means[0], means[means.len() - 1]),
                    "nonincreasing ensemble mean",
                    Status::from_bool(fit.slope <= 0.0 || means[means.len() - 1] <= means[0]),
                )),
                Err(_) => lines.push(line(source, name, "flat".into(), "nonincreasing ensemble mean", Status::Pass)),
            }
        }
        if lines.is_empty() {
            lines.push(line(source, "rows", rows.len().to_string(), "at least four steps", Status::NoData));
        }
        return Ok(lines);
    }
    if header == ["row", "col", "distance"] {
        return Ok(vec![line(source, "matched pairs", rows.len().to_string(), "assignment", Status::Info)]);
    }
    Ok(vec![line(source, "points", rows.len().to_string(), "sample cloud", Status::Info)])
}

/// `(x, level, value, stderr)` of one scan row.
type ScanPoint = (f64, Option<u32>, f64, f64);

fn summarize_scan(source: &str, rows: &[csv::StringRecord]) -> Vec<SummaryLine> {
    let mut groups: Vec<(String, Vec<ScanPoint>)> = Vec::new();
    for r in rows {
        let exp = r.get(0).unwrap_or("").to_string();
        let Some(x) = r.get(3).and_then(parse_f) else { continue };
        let level = r.get(4).and_then(|s| s.parse().ok());
        let Some(v) = r.get(6).and_then(parse_f) else { continue };
        let se = r.get(7).and_then(parse_f).unwrap_or(f64::NAN);
        match groups.iter_mut().find(|g| g.0 == exp) {
            Some(g) => g.1.push((x, level, v, se)),
            None => groups.push((exp, vec![(x, level, v, se)])),
        }
    }
    let mut out = Vec::new();
    let value_of = |name: &str| groups.iter().find(|g| g.0 == name).and_then(|g| g.1.first()).map(|p| (p.2, p.3));
    for (exp, pts) in &groups {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let slope = |xs: &[f64], ys: &[f64]| loglog_slope(xs, ys);
        match exp.as_str() {
            "one-step-error" => out.push(match slope(&xs, &ys) {
                Ok(f) => line(source, "one-step error slope vs T", format!("{:.3} (r^2 {:.4})", f.slope, f.r2), "slope >= 2.6, r^2 >= 0.98", Status::from_bool(f.slope >= 2.6 && f.r2 >= 0.98)),
                Err(e) => line(source, "one-step error slope vs T", e.to_string(), "slope >= 2.6, r^2 >= 0.98", Status::Fail),
            }),
            "adjacent-level" | "adjacent-level-nodes" => {
                let ls: Vec<f64> = pts.iter().map(|p| 2f64.powi(p.1.unwrap_or(0) as i32)).collect();
                let nodes = exp == "adjacent-level-nodes";
                let q = if nodes { "log2 slope vs level (nodes only)" } else { "log2 slope vs level" };
                out.push(match slope(&ls, &ys) {
                    Ok(f) if nodes => line(source, q, format!("{:.3}", f.slope), "reported", Status::Info),
                    Ok(f) => line(source, q, format!("{:.3}", f.slope), "slope in [-1.4, -0.6]", Status::from_bool((-1.4..=-0.6).contains(&f.slope))),
                    Err(e) => line(source, q, e.to_string(), "slope in [-1.4, -0.6]", Status::Fail),
                });
            }
            "w1-excess" => {
                let top = pts.iter().filter_map(|p| p.1).max();
                let fit_pts: Vec<_> = pts.iter().filter(|p| p.1 != top).collect();
                let xs: Vec<f64> = fit_pts.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = fit_pts.iter().map(|p| p.2).collect();
                out.push(match slope(&xs, &ys) {
                    Ok(f) => line(source, "W1 excess slope vs delta", format!("{:.3}", f.slope), "slope >= 0.35", Status::from_bool(f.slope >= 0.35)),
                    Err(e) => line(source, "W1 excess slope vs delta", e.to_string(), "slope >= 0.35", Status::Fail),
                });
            }
            "w1" => {
                let mut s = pts.clone();
                s.sort_by(|a, b| a.0.total_cmp(&b.0));
                let bad = s.windows(2).filter(|w| w[0].2 > w[1].2 + 2.0 * w[0].3.hypot(w[1].3)).count();
                out.push(line(source, "W1 monotone in delta", format!("{bad} violations"), "within 2 stderr", Status::from_bool(bad == 0)));
            }
            "sgld-bias" | "sgld-bias-exact" => {
                let exact = exp == "sgld-bias-exact";
                let q = if exact { "closed-form gap slope vs delta" } else { "SGLD gap slope vs delta" };
                out.push(match slope(&xs, &ys) {
                    Ok(f) if exact => line(source, q, format!("{:.3}", f.slope), "reported", Status::Info),
                    Ok(f) => line(source, q, format!("{:.3}", f.slope), "slope >= 0.7", Status::from_bool(f.slope >= 0.7)),
                    Err(e) => line(source, q, e.to_string(), "slope >= 0.7", Status::Fail),
                });
            }
            "tail-check-observed" => {
                if let (Some((obs, _)), Some((bound, bse))) = (value_of("tail-check-observed"), value_of("tail-check-bound")) {
                    out.push(line(source, "tail exceedance", format!("{obs} (bound {bound:.4e})"), "observed <= bound + 3 stderr", Status::from_bool(obs <= bound + 3.0 * bse)));
                }
            }
            e if e.starts_with("tail-check") => {}
            _ => out.push(match slope(&xs, &ys) {
                Ok(f) => line(source, &format!("{exp} slope"), format!("{:.3} (r^2 {:.4})", f.slope, f.r2), "reported", Status::Info),
                Err(e) => line(source, &format!("{exp} slope"), e.to_string(), "reported", Status::NoData),
            }),
        }
    }
    if out.is_empty() {
        out.push(line(source, "rows", "0".into(), "at least one row", Status::NoData));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_round_trip() {
        for kind in [
            ExperimentKind::Sample,
            ExperimentKind::Sgld,
            ExperimentKind::OneStepError,
            ExperimentKind::AdjacentLevel,
            ExperimentKind::Coupling,
            ExperimentKind::W1Scaling,
            ExperimentKind::SgldBias,
            ExperimentKind::LemmaCheck,
            ExperimentKind::TailCheck,
        ] {
            let c = ExperimentConfig::new(kind).resolve().unwrap();
            let text = c.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{text}");
            assert_eq!(c.resolve().unwrap(), c);
        }
    }

    #[test]
    fn unknown_fields_and_kinds_are_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"sample\"\nstepsize = 0.1\n").is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"mcmc\"\n").is_err());
        let mut c = ExperimentConfig::new(ExperimentKind::Sample);
        c.stepsizes = Some(vec![-1.0]);
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn synthetic_cubic_summarizes_to_slope_three() {
        let mut text = String::from("# seed: 0\n");
        text.push_str(&SCAN_COLUMNS.join(","));
        text.push('\n');
        for k in 1..=5 {
            let t = 2f64.powi(-k);
            text.push_str(&format!("one-step-error,S^2,x,{t},9,,{},0,0\n", t.powi(3)));
        }
        let s = summarize("synthetic", &text).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].measured.starts_with("3.000"), "{s:?}");
        assert_eq!(s[0].status, Status::Pass);
    }

    #[test]
    fn empty_csv_has_no_data() {
        let s = summarize("empty", "").unwrap();
        assert_eq!(s[0].status, Status::NoData);
        let header_only = format!("# x\n{}\n", SCAN_COLUMNS.join(","));
        assert_eq!(summarize("h", &header_only).unwrap()[0].status, Status::NoData);
    }

    #[test]
    fn small_runs_are_deterministic_across_threads() {
        let mut c = ExperimentConfig::new(ExperimentKind::OneStepError);
        c.reps = Some(20);
        c.i_max = Some(5);
        c.seed = 11;
        let c = c.resolve().unwrap();
        let a = with_threads(1, || render(&c, &run(&c).unwrap()).unwrap()).unwrap();
        let b = with_threads(3, || render(&c, &run(&c).unwrap()).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_output_reads_back_as_cloud() {
        let mut c = ExperimentConfig::new(ExperimentKind::Sample);
        c.reps = Some(8);
        c.steps = Some(10);
        let c = c.resolve().unwrap();
        let bytes = render(&c, &run(&c).unwrap()).unwrap();
        let cloud = SampleCloud::read_csv(bytes.as_slice()).unwrap();
        assert_eq!(cloud.len(), 8);
    }

    #[test]
    fn failed_run_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = ExperimentConfig::new(ExperimentKind::Sample);
        c.stepsizes = Some(vec![10.0]);
        c.steps = Some(5);
        c.reps = Some(2);
        assert!(run_to_file(&c, Some(dir.path())).is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
