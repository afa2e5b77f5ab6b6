//! Synchronous and reflection couplings of two geodesic Euler-Maruyama
//! chains, and contraction-rate fits over ensembles of coupled pairs.
//!
//! Both chains draw the same standard normal coordinates `xi`. The first
//! chain maps them through its Gram-Schmidt frame; the second through that
//! frame transported along the minimizing geodesic from `x` to `y`. The
//! reflection coupling first flips the coordinate along the geodesic
//! direction.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::linear_fit;
use crate::error::{invalid, Error, Result};
use crate::lyapunov::{LyapunovFunction, LyapunovParams};
use crate::manifolds::{dot, Frame, Manifold};
use crate::noise::{derive_seed, keyed_rng, standard_normal_vec, Stream};
use crate::potentials::Potential;
use crate::samplers::{check_stepsize, em_step, mean_stderr, StepsizeGuard};

/// Default reflection threshold.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// Largest allowed deviation of the transported frame from orthonormality.
const FRAME_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CouplingKind {
    Synchronous,
    /// Reflect unless `d(x, y) <= threshold`.
    Reflection {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl CouplingKind {
    pub fn reflection() -> Self {
        CouplingKind::Reflection { threshold: DEFAULT_THRESHOLD }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CouplingKind::Synchronous => "synchronous",
            CouplingKind::Reflection { .. } => "reflection",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub frame_x: Frame,
    /// `frame_x` transported to `y`.
    pub frame_y: Frame,
    /// Unit direction of the geodesic from `x` to `y` (zero if they meet).
    pub direction: Vec<f64>,
    pub distance: f64,
    /// The connecting geodesic was not unique (antipodal points).
    pub nonunique: bool,
}

impl CoupledState {
    pub fn new(m: &Manifold, x: &[f64], y: &[f64]) -> Result<Self> {
        m.check_point(x)?;
        m.check_point(y)?;
        let frame_x = m.gram_schmidt_frame(x);
        let g = m.geodesic(x, y);
        let frame_y = g.transport_frame(&frame_x);
        let residual = m.frame_residual(&frame_y);
        if residual > FRAME_TOL {
            return Err(invalid(format!("transported frame lost orthonormality ({residual:e})")));
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            frame_x,
            frame_y,
            direction: g.direction().to_vec(),
            distance: g.length(),
            nonunique: g.nonunique(),
        })
    }

    /// Coordinates of the geodesic direction in `frame_x`, zeroed when the
    /// points are within `threshold`.
    pub fn reflection_axis(&self, m: &Manifold, threshold: f64) -> Vec<f64> {
        let d = self.frame_x.len();
        if self.distance <= threshold {
            return vec![0.0; d];
        }
        let mut nu = m.frame_coords(&self.frame_x, &self.direction);
        let n = dot(&nu, &nu).sqrt();
        if n == 0.0 {
            return vec![0.0; d];
        }
        nu.iter_mut().for_each(|c| *c /= n);
        nu
    }
}

/// `(I - 2 nu nu^T) xi`.
pub fn reflect(xi: &[f64], nu: &[f64]) -> Vec<f64> {
    let c = 2.0 * dot(xi, nu);
    xi.iter().zip(nu).map(|(a, b)| a - c * b).collect()
}

/// One coupled step with the given coordinates.
pub fn coupled_step_with(
    s: &CoupledState,
    p: &dyn Potential,
    delta: f64,
    kind: CouplingKind,
    xi: &[f64],
) -> Result<CoupledState> {
    let m = p.manifold();
    let xi_y = match kind {
        CouplingKind::Synchronous => xi.to_vec(),
        CouplingKind::Reflection { threshold } => reflect(xi, &s.reflection_axis(&m, threshold)),
    };
    let x = em_step(&m, &s.x, &p.drift(&s.x), delta, &s.frame_x.combine(xi));
    let y = em_step(&m, &s.y, &p.drift(&s.y), delta, &s.frame_y.combine(&xi_y));
    if x.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: 1 });
    }
    CoupledState::new(&m, &x, &y)
}

pub fn synchronous_step<R: Rng + ?Sized>(
    s: &CoupledState,
    p: &dyn Potential,
    delta: f64,
    rng: &mut R,
) -> Result<CoupledState> {
    let xi = standard_normal_vec(rng, s.frame_x.len());
    coupled_step_with(s, p, delta, CouplingKind::Synchronous, &xi)
}

pub fn reflection_step<R: Rng + ?Sized>(
    s: &CoupledState,
    p: &dyn Potential,
    delta: f64,
    threshold: f64,
    rng: &mut R,
) -> Result<CoupledState> {
    let xi = standard_normal_vec(rng, s.frame_x.len());
    coupled_step_with(s, p, delta, CouplingKind::Reflection { threshold }, &xi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    pub stepsize: f64,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub guard: StepsizeGuard,
    /// Parameters of `f` for the reported `f(d)` series.
    #[serde(default)]
    pub lyapunov: Option<LyapunovParams>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledSeries {
    pub stepsize: f64,
    /// `d(x_k, y_k)` for `k = 0..=steps`.
    pub distances: Vec<f64>,
    /// `f(d(x_k, y_k))` when Lyapunov parameters were given.
    pub lyapunov: Option<Vec<f64>>,
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
    /// Steps whose connecting geodesic was not unique.
    pub nonunique: usize,
}

/// Run one coupled pair. The coordinates come from the same stream as
/// [`crate::samplers::run_langevin`] with `cfg.seed`, so the `x` marginal
/// reproduces that chain exactly.
pub fn run_coupled(p: &dyn Potential, cfg: &CouplingConfig, x0: &[f64], y0: &[f64]) -> Result<CoupledSeries> {
    let m = p.manifold();
    check_stepsize(p, cfg.stepsize, cfg.guard)?;
    let lf = cfg.lyapunov.map(LyapunovFunction::new).transpose()?;
    let mut rng = keyed_rng(cfg.seed, Stream::Langevin, 0, 0);
    let mut s = CoupledState::new(&m, x0, y0)?;
    let mut distances = Vec::with_capacity(cfg.steps + 1);
    let mut nonunique = usize::from(s.nonunique);
    distances.push(s.distance);
    for k in 0..cfg.steps {
        let xi = standard_normal_vec(&mut rng, s.frame_x.len());
        s = coupled_step_with(&s, p, cfg.stepsize, cfg.kind, &xi).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite { step: k + 1 },
            e => e,
        })?;
        nonunique += usize::from(s.nonunique);
        distances.push(s.distance);
    }
    let lyapunov = lf.map(|f| distances.iter().map(|&d| f.f(d)).collect());
    Ok(CoupledSeries { stepsize: cfg.stepsize, distances, lyapunov, final_x: s.x, final_y: s.y, nonunique })
}

/// Run many pairs in parallel; pair `i` uses a seed derived from
/// `(cfg.seed, i)`, so the result does not depend on the thread count.
pub fn run_coupled_ensemble(
    p: &dyn Potential,
    cfg: &CouplingConfig,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<CoupledSeries>> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x0, y0))| {
            let cfg = CouplingConfig { seed: derive_seed(cfg.seed, Stream::Coupling, i as u64, 0), ..cfg.clone() };
            run_coupled(p, &cfg, x0, y0)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `-slope` of `log E[metric]` against time.
    pub rate: f64,
    pub stderr: f64,
    /// Number of time points fitted.
    pub points: usize,
}

/// Exponential rate of the ensemble mean of `series` (all of equal length,
/// sampled every `delta`). The first half is dropped as burn-in.
pub fn contraction_rate_fit(series: &[Vec<f64>], delta: f64) -> Result<RateFit> {
    let n = series.first().map(Vec::len).ok_or_else(|| invalid("no series to fit"))?;
    if series.iter().any(|s| s.len() != n) {
        return Err(invalid("series lengths differ"));
    }
    let start = n / 2;
    if n - start < 2 {
        return Err(invalid("series too short to fit a rate"));
    }
    let mut ts = Vec::with_capacity(n - start);
    let mut ls = Vec::with_capacity(n - start);
    for k in start..n {
        let mean = series.iter().map(|s| s[k]).sum::<f64>() / series.len() as f64;
        if !(mean > 0.0) {
            return Err(invalid(format!("ensemble mean is not positive at step {k}")));
        }
        ts.push(k as f64 * delta);
        ls.push(mean.ln());
    }
    let fit = linear_fit(&ts, &ls)?;
    let npts = ts.len() as f64;
    let mt = ts.iter().sum::<f64>() / npts;
    let sxx: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sse: f64 = ts.iter().zip(&ls).map(|(t, l)| (l - fit.intercept - fit.slope * t).powi(2)).sum();
    let stderr = if ts.len() > 2 { (sse / (npts - 2.0) / sxx).sqrt() } else { f64::NAN };
    Ok(RateFit { rate: -fit.slope, stderr, points: ts.len() })
}

/// Monte Carlo one-step factor `E d(x_1, y_1)^2 / d(x_0, y_0)^2` averaged
/// over pairs, with its standard error.
pub fn one_step_contraction(
    p: &dyn Potential,
    kind: CouplingKind,
    delta: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> Result<(f64, f64)> {
    let m = p.manifold();
    let ratios = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| {
            let s = CoupledState::new(&m, x, y)?;
            if s.distance == 0.0 {
                return Err(invalid("coincident pair"));
            }
            let mut rng = keyed_rng(seed, Stream::Coupling, i as u64, 1);
            let xi = standard_normal_vec(&mut rng, s.frame_x.len());
            let next = coupled_step_with(&s, p, delta, kind, &xi)?;
            Ok((next.distance / s.distance).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&ratios))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{GaussianQuadratic, VonMisesFisher, ZeroPotential};
    use crate::samplers::{run_langevin, ChainConfig};

    fn cfg(kind: CouplingKind, stepsize: f64, steps: usize) -> CouplingConfig {
        CouplingConfig { kind, stepsize, steps, seed: 3, guard: StepsizeGuard::Enforce, lyapunov: None }
    }

    #[test]
    fn synchronous_euclidean_is_exactly_geometric() {
        let p = GaussianQuadratic { c: 1.0, mean: vec![0.0, 0.0, 0.0] };
        let delta = 0.01;
        let s = run_coupled(&p, &cfg(CouplingKind::Synchronous, delta, 50), &[1.0, 0.0, 2.0], &[-1.0, 0.5, 0.0])
            .unwrap();
        for w in s.distances.windows(2) {
            assert!((w[1] / w[0] - (1.0 - delta / 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn coincident_start_stays_coupled() {
        let p = VonMisesFisher::new(2.0, vec![0.0, 0.0, 1.0]).unwrap();
        for kind in [CouplingKind::Synchronous, CouplingKind::reflection()] {
            let x = [0.6, 0.0, 0.8];
            let s = run_coupled(&p, &cfg(kind, 0.01, 30), &x, &x).unwrap();
            assert!(s.distances.iter().all(|&d| d == 0.0));
        }
    }

    #[test]
    fn x_marginal_is_the_langevin_chain() {
        let p = VonMisesFisher::new(2.0, vec![0.0, 0.0, 1.0]).unwrap();
        let x0 = vec![1.0, 0.0, 0.0];
        let c = cfg(CouplingKind::reflection(), 0.01, 40);
        let s = run_coupled(&p, &c, &x0, &[0.0, 1.0, 0.0]).unwrap();
        let chain = ChainConfig {
            stepsize: 0.01,
            steps: 40,
            seed: c.seed,
            initial: x0,
            record_frames: false,
            guard: StepsizeGuard::Enforce,
        };
        let t = run_langevin(&p, &chain).unwrap();
        assert_eq!(t.last(), s.final_x.as_slice());
    }

    #[test]
    fn reflection_doubles_radial_noise_in_flat_space() {
        let p = ZeroPotential { manifold: Manifold::euclidean(3) };
        let m = p.manifold;
        let s = CoupledState::new(&m, &[0.0, 0.0, 0.0], &[2.0, 0.0, 0.0]).unwrap();
        let xi = [0.3, -1.1, 0.7];
        let delta = 0.04;
        let n = coupled_step_with(&s, &p, delta, CouplingKind::reflection(), &xi).unwrap();
        // y - x along e_0 loses 2 sqrt(delta) xi_0; other directions cancel.
        assert!((n.y[0] - n.x[0] - (2.0 - 2.0 * delta.sqrt() * 0.3)).abs() < 1e-15);
        assert!((n.y[1] - n.x[1]).abs() < 1e-15 && (n.y[2] - n.x[2]).abs() < 1e-15);
    }

    #[test]
    fn reflection_below_threshold_is_synchronous() {
        let p = VonMisesFisher::new(1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let m = p.manifold();
        let y = m.exp(&[1.0, 0.0, 0.0], &[0.0, 1e-3, 0.0]);
        let s = CoupledState::new(&m, &[1.0, 0.0, 0.0], &y).unwrap();
        let xi = [0.4, -0.2];
        let a = coupled_step_with(&s, &p, 0.01, CouplingKind::Reflection { threshold: 1e-2 }, &xi).unwrap();
        let b = coupled_step_with(&s, &p, 0.01, CouplingKind::Synchronous, &xi).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reflection_is_orthogonal() {
        let nu = [0.6, 0.0, -0.8];
        let xi = [1.3, -0.4, 2.2];
        let r = reflect(&xi, &nu);
        assert!((dot(&r, &r) - dot(&xi, &xi)).abs() < 1e-14);
    }

    #[test]
    fn rate_fit_recovers_geometric_decay() {
        let delta = 0.1;
        let r: f64 = 0.97;
        let series = vec![(0..40).map(|k| 5.0 * r.powi(k)).collect::<Vec<f64>>()];
        let fit = contraction_rate_fit(&series, delta).unwrap();
        assert!((fit.rate + r.ln() / delta).abs() < 1e-10);
        let flat = vec![vec![2.0; 10]];
        assert!(contraction_rate_fit(&flat, delta).unwrap().rate.abs() < 1e-15);
    }

    #[test]
    fn synchronous_squared_distance_rate() {
        let p = GaussianQuadratic { c: 1.0, mean: vec![0.0, 0.0] };
        let c = cfg(CouplingKind::Synchronous, 0.01, 400);
        let s = run_coupled(&p, &c, &[1.0, 1.0], &[-1.0, 0.0]).unwrap();
        let sq: Vec<f64> = s.distances.iter().map(|d| d * d).collect();
        let fit = contraction_rate_fit(&[sq], 0.01).unwrap();
        assert!((fit.rate - 1.0).abs() < 0.05, "{}", fit.rate);
    }

    #[test]
    fn ensemble_is_order_independent() {
        let p = VonMisesFisher::new(1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let pairs = vec![
            (vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]),
            (vec![0.0, 0.0, 1.0], vec![0.0, 0.6, 0.8]),
        ];
        let c = cfg(CouplingKind::reflection(), 0.01, 20);
        let all = run_coupled_ensemble(&p, &c, &pairs).unwrap();
        let second = run_coupled_ensemble(&p, &CouplingConfig { seed: c.seed, ..c.clone() }, &pairs[..2]).unwrap();
        assert_eq!(all, second);
        let solo = run_coupled(
            &p,
            &CouplingConfig { seed: derive_seed(c.seed, Stream::Coupling, 1, 0), ..c.clone() },
            &pairs[1].0,
            &pairs[1].1,
        )
        .unwrap();
        assert_eq!(all[1], solo);
    }
}
