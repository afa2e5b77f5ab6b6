//! Numerical checks of the comparison inequalities used in the analysis:
//! block bounds for the linear matrix ODE behind the Jacobi equation,
//! Jacobi-field growth and transport-residual bounds, and distance
//! expansions after exponential-map steps.
//!
//! Every check records `rhs - lhs` and counts a violation when it drops
//! below `-SLACK`.

pub mod distance;
pub mod jacobi;
pub mod matrix_ode;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lyapunov::{check_f_properties, LyapunovParams, PsiScale};
use crate::manifolds::Manifold;
use crate::noise::{keyed_rng, standard_normal_vec, Stream};

/// Absolute slack allowed on every inequality.
pub const SLACK: f64 = 1e-6;

/// Outcome of one named inequality over many evaluations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub evaluations: usize,
    pub violations: usize,
    /// Smallest `rhs - lhs`.
    pub worst_slack: f64,
    /// Trial index of the smallest slack.
    pub worst_trial: usize,
}

impl Check {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), evaluations: 0, violations: 0, worst_slack: f64::INFINITY, worst_trial: 0 }
    }

    /// Record `lhs <= rhs` for trial `trial`.
    pub fn record(&mut self, trial: usize, lhs: f64, rhs: f64) {
        let slack = rhs - lhs;
        self.evaluations += 1;
        if !(slack >= -SLACK) {
            self.violations += 1;
        }
        if !(slack >= self.worst_slack) {
            self.worst_slack = slack;
            self.worst_trial = trial;
        }
    }

    pub fn passed(&self) -> bool {
        self.evaluations > 0 && self.violations == 0
    }

    /// Combine the same check over disjoint trial batches.
    pub fn merge(&mut self, other: &Check) {
        self.evaluations += other.evaluations;
        self.violations += other.violations;
        if other.worst_slack < self.worst_slack || self.worst_slack.is_nan() {
            self.worst_slack = other.worst_slack;
            self.worst_trial = other.worst_trial;
        }
    }
}

/// Merge per-trial reports (same check names in the same order).
pub fn merge_reports(reports: impl IntoIterator<Item = Vec<Check>>) -> Vec<Check> {
    let mut out: Vec<Check> = Vec::new();
    for r in reports {
        if out.is_empty() {
            out = r;
            continue;
        }
        for (a, b) in out.iter_mut().zip(&r) {
            a.merge(b);
        }
    }
    out
}

pub fn all_passed(checks: &[Check]) -> bool {
    !checks.is_empty() && checks.iter().all(Check::passed)
}

/// Random point: the base point moved by a Gaussian tangent vector of
/// standard deviation `spread`.
pub fn random_point<R: Rng + ?Sized>(m: &Manifold, spread: f64, rng: &mut R) -> Vec<f64> {
    let x = m.base_point();
    let v = random_tangent(m, &x, spread, rng);
    m.exp(&x, &v)
}

/// Gaussian tangent vector at `x` with per-coordinate deviation `scale`.
pub fn random_tangent<R: Rng + ?Sized>(m: &Manifold, x: &[f64], scale: f64, rng: &mut R) -> Vec<f64> {
    let frame = m.gram_schmidt_frame(x);
    let z: Vec<f64> = standard_normal_vec(rng, frame.len()).into_iter().map(|c| c * scale).collect();
    frame.combine(&z)
}

/// Tangent vector at `x` with uniformly random direction and norm `norm`.
pub fn tangent_with_norm<R: Rng + ?Sized>(m: &Manifold, x: &[f64], norm: f64, rng: &mut R) -> Vec<f64> {
    let v = random_tangent(m, x, 1.0, rng);
    let n = m.norm(&v);
    v.iter().map(|c| c * norm / n).collect()
}

/// `(L, R, eps)` uniform on `[0.5, 4] x [1.5, 3] x [0, 1/(4 sqrt L)]`.
pub fn random_lyapunov_params<R: Rng + ?Sized>(scale: PsiScale, rng: &mut R) -> LyapunovParams {
    let l = 0.5 + 3.5 * rng.random::<f64>();
    let r = 1.5 + 1.5 * rng.random::<f64>();
    let eps = rng.random::<f64>() / (4.0 * l.sqrt());
    LyapunovParams { l, r, epsilon: eps, scale }
}

/// The four shape properties of `f` for `trials` random parameter sets,
/// each on a grid of `n_grid + 1` points.
pub fn lyapunov_suite(trials: usize, n_grid: usize, scale: PsiScale, seed: u64) -> Result<Vec<Check>> {
    let reports = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, Stream::Probe, i as u64, 5);
            let params = random_lyapunov_params(scale, &mut rng);
            Ok(check_f_properties(params, n_grid)?
                .into_iter()
                .map(|p| {
                    let mut c = Check::new(p.name);
                    c.record(i, 0.0, p.worst_slack);
                    c
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_reports(reports))
}
