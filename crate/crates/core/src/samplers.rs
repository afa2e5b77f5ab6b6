//! Geodesic Euler-Maruyama, SGLD, and the multilevel dyadic construction.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manifolds::{axpy, Frame, Manifold};
use crate::noise::{derive_seed, keyed_rng, standard_normal_vec, DyadicBrownianPath, Stream};
use crate::potentials::{Potential, StochasticGradOracle};

/// What to do when the stepsize exceeds the admissible bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepsizeGuard {
    #[default]
    Enforce,
    Warn,
}

/// `min(1/(16 L_beta'), 1/(16 L_R d))`, infinite terms dropped.
pub fn stepsize_bound(p: &dyn Potential) -> f64 {
    let m = p.manifold();
    let lb = p.lipschitz_drift();
    let lr = m.curvature_bounds().l_r * m.intrinsic_dim() as f64;
    let a = if lb > 0.0 { 1.0 / (16.0 * lb) } else { f64::INFINITY };
    let b = if lr > 0.0 { 1.0 / (16.0 * lr) } else { f64::INFINITY };
    a.min(b)
}

pub fn check_stepsize(p: &dyn Potential, delta: f64, guard: StepsizeGuard) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("stepsize must be positive, got {delta}")));
    }
    let bound = stepsize_bound(p);
    if delta > bound {
        match guard {
            StepsizeGuard::Enforce => return Err(Error::StepsizeTooLarge { delta, bound }),
            StepsizeGuard::Warn => log::warn!("stepsize {delta} exceeds the admissible bound {bound}"),
        }
    }
    Ok(())
}

/// `Exp_x(delta * drift + sqrt(delta) * noise)`.
pub fn em_step(m: &Manifold, x: &[f64], drift: &[f64], delta: f64, noise: &[f64]) -> Vec<f64> {
    let sd = delta.sqrt();
    let v: Vec<f64> = drift.iter().zip(noise).map(|(b, z)| delta * b + sd * z).collect();
    m.exp(x, &v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub stepsize: f64,
    pub steps: usize,
    pub seed: u64,
    pub initial: Vec<f64>,
    #[serde(default)]
    pub record_frames: bool,
    #[serde(default)]
    pub guard: StepsizeGuard,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub stepsize: f64,
    /// `steps + 1` points, starting with the initial point.
    pub points: Vec<Vec<f64>>,
    /// Frame used for the noise of each step, if requested.
    pub frames: Option<Vec<Frame>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.points.last().expect("trajectory holds the initial point")
    }
}

fn run_chain<F>(p: &dyn Potential, cfg: &ChainConfig, mut drift: F) -> Result<Trajectory>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let m = p.manifold();
    m.check_point(&cfg.initial)?;
    check_stepsize(p, cfg.stepsize, cfg.guard)?;
    let mut rng = keyed_rng(cfg.seed, Stream::Langevin, 0, 0);
    let mut points = Vec::with_capacity(cfg.steps + 1);
    let mut frames = cfg.record_frames.then(|| Vec::with_capacity(cfg.steps));
    points.push(cfg.initial.clone());
    let d = m.intrinsic_dim();
    for k in 0..cfg.steps {
        let x = &points[k];
        let frame = m.gram_schmidt_frame(x);
        let noise = frame.combine(&standard_normal_vec(&mut rng, d));
        let next = em_step(&m, x, &drift(x), cfg.stepsize, &noise);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        if let Some(f) = frames.as_mut() {
            f.push(frame);
        }
        points.push(next);
    }
    Ok(Trajectory { stepsize: cfg.stepsize, points, frames })
}

/// Geodesic Euler-Maruyama chain with exact drift.
pub fn run_langevin(p: &dyn Potential, cfg: &ChainConfig) -> Result<Trajectory> {
    run_chain(p, cfg, |x| p.drift(x))
}

/// SGLD: the drift is one uniformly drawn component per step. The Gaussian
/// stream is the same as in [`run_langevin`] for the same seed, so the two
/// chains are coupled step by step.
pub fn run_sgld(oracle: &StochasticGradOracle, cfg: &ChainConfig) -> Result<Trajectory> {
    let mut pick = keyed_rng(cfg.seed, Stream::Component, 0, 0);
    run_chain(&oracle.sum, cfg, |x| oracle.sample_drift(x, &mut pick))
}

/// All levels `0..=i_max` of the dyadic construction driven by one path.
///
/// Level `i+1` takes two half steps from each even node, rolling its frame
/// along the first half step; at the next even node the frame is reset to
/// the coarse frame transported across.
#[derive(Clone, Debug)]
pub struct MultilevelRun {
    pub manifold: Manifold,
    pub horizon: f64,
    pub i_max: u32,
    pub points: Vec<Vec<Vec<f64>>>,
    pub frames: Vec<Vec<Frame>>,
    pub path: DyadicBrownianPath,
    /// Transports taken from a cut-locus configuration.
    pub nonunique: usize,
}

pub fn build_multilevel(p: &dyn Potential, x0: &[f64], horizon: f64, i_max: u32, seed: u64) -> Result<MultilevelRun> {
    let m = p.manifold();
    let path = DyadicBrownianPath::new(horizon, m.intrinsic_dim(), seed)?;
    build_multilevel_from_path(p, x0, path, i_max, None)
}

pub fn build_multilevel_from_path(
    p: &dyn Potential,
    x0: &[f64],
    mut path: DyadicBrownianPath,
    i_max: u32,
    frame0: Option<Frame>,
) -> Result<MultilevelRun> {
    let m = p.manifold();
    m.check_point(x0)?;
    if path.dim() != m.intrinsic_dim() {
        return Err(Error::DimensionMismatch { expected: m.intrinsic_dim(), got: path.dim() });
    }
    path.refine_to(i_max)?;
    let horizon = path.horizon();
    let e0 = frame0.unwrap_or_else(|| m.gram_schmidt_frame(x0));
    let mut nonunique = 0;
    let mut inc = vec![0.0; m.intrinsic_dim()];

    let step = |x: &[f64], frame: &Frame, delta: f64, inc: &[f64]| -> Vec<f64> {
        let mut v = frame.combine(inc);
        axpy(delta, &p.drift(x), &mut v);
        m.exp(x, &v)
    };

    path.increment_into(0, 0, &mut inc)?;
    let x1 = step(x0, &e0, horizon, &inc);
    let g = m.geodesic(x0, &x1);
    nonunique += g.nonunique() as usize;
    let e1 = g.transport_frame(&e0);
    let mut points = vec![vec![x0.to_vec(), x1]];
    let mut frames = vec![vec![e0.clone(), e1]];

    for i in 0..i_max {
        let level = i + 1;
        let delta = path.stepsize(level);
        let n_coarse = 1usize << i;
        let mut pts = Vec::with_capacity(2 * n_coarse + 1);
        let mut frs = Vec::with_capacity(2 * n_coarse + 1);
        pts.push(x0.to_vec());
        frs.push(e0.clone());
        for k in 0..n_coarse {
            let a = pts[2 * k].clone();
            let ea = frs[2 * k].clone();
            path.increment_into(level, 2 * k as u64, &mut inc)?;
            let mid = step(&a, &ea, delta, &inc);
            let g = m.geodesic(&a, &mid);
            nonunique += g.nonunique() as usize;
            let emid = g.transport_frame(&ea);
            path.increment_into(level, 2 * k as u64 + 1, &mut inc)?;
            let end = step(&mid, &emid, delta, &inc);
            let g = m.geodesic(&points[i as usize][k + 1], &end);
            nonunique += g.nonunique() as usize;
            let eend = g.transport_frame(&frames[i as usize][k + 1]);
            if end.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step: 2 * k + 2 });
            }
            pts.push(mid);
            frs.push(emid);
            pts.push(end);
            frs.push(eend);
        }
        points.push(pts);
        frames.push(frs);
    }
    Ok(MultilevelRun { manifold: m, horizon, i_max, points, frames, path, nonunique })
}

impl MultilevelRun {
    pub fn stepsize(&self, level: u32) -> f64 {
        self.horizon / (1u64 << level) as f64
    }

    pub fn endpoint(&self, level: u32) -> &[f64] {
        self.points[level as usize].last().expect("levels are non-empty")
    }

    /// `x^i(t)`: geodesic interpolation of the step leaving node `k`.
    pub fn interpolate(&self, p: &dyn Potential, level: u32, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon).contains(&t) || level > self.i_max {
            return Err(invalid(format!("no interpolant at level {level}, time {t}")));
        }
        let delta = self.stepsize(level);
        let n = 1usize << level;
        let k = ((t / delta).floor() as usize).min(n - 1);
        let s = t / delta - k as f64;
        let x = &self.points[level as usize][k];
        let inc = self.path.increment(level, k as u64)?;
        let mut v = self.frames[level as usize][k].combine(&inc);
        axpy(delta, &p.drift(x), &mut v);
        v.iter_mut().for_each(|c| *c *= s);
        Ok(self.manifold.exp(x, &v))
    }

    /// Squared distance between levels `i` and `i+1`: maximum over the fine
    /// grid `t = k delta_{i+1}`, and over the shared coarse nodes only.
    pub fn adjacent_level_error(&self, p: &dyn Potential, level: u32) -> Result<(f64, f64)> {
        if level >= self.i_max {
            return Err(invalid(format!("level {level} has no finer neighbour (i_max {})", self.i_max)));
        }
        let m = self.manifold;
        let coarse = &self.points[level as usize];
        let fine = &self.points[level as usize + 1];
        let delta_fine = self.stepsize(level + 1);
        let mut grid_max: f64 = 0.0;
        let mut node_max: f64 = 0.0;
        for (kk, y) in fine.iter().enumerate() {
            let d2 = if kk % 2 == 0 {
                let d2 = m.dist(&coarse[kk / 2], y).powi(2);
                node_max = node_max.max(d2);
                d2
            } else {
                let x = self.interpolate(p, level, kk as f64 * delta_fine)?;
                m.dist(&x, y).powi(2)
            };
            grid_max = grid_max.max(d2);
        }
        Ok((grid_max, node_max))
    }

    /// Largest deviation from a fresh rebuild on the same path.
    pub fn replay_deviation(&self, p: &dyn Potential) -> Result<f64> {
        let again = build_multilevel_from_path(
            p,
            &self.points[0][0],
            self.path.clone(),
            self.i_max,
            Some(self.frames[0][0].clone()),
        )?;
        let mut worst: f64 = 0.0;
        for (a, b) in self.points.iter().flatten().zip(again.points.iter().flatten()) {
            for (u, v) in a.iter().zip(b) {
                worst = worst.max((u - v).abs());
            }
        }
        Ok(worst)
    }
}

/// Mean and standard error of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    /// Horizon `T` (one-step table) or level `i` (adjacent-level table).
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// `E d(x^0(T), x^{i_max}(T))^2` for each horizon, with `x^{i_max}` standing
/// in for the limit.
pub fn one_step_error_table(
    p: &dyn Potential,
    x0: &[f64],
    horizons: &[f64],
    i_max: u32,
    reps: usize,
    seed: u64,
) -> Result<Vec<ErrorRow>> {
    let m = p.manifold();
    horizons
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let errs = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let s = derive_seed(seed, Stream::Replicate, ti as u64, r as u64);
                    let run = build_multilevel(p, x0, t, i_max, s)?;
                    Ok(m.dist(run.endpoint(0), run.endpoint(i_max)).powi(2))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, stderr) = mean_stderr(&errs);
            Ok(ErrorRow { x: t, mean, stderr, reps })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: u32,
    /// `E max_t d(x^i(t), x^{i+1}(t))^2` over the fine grid.
    pub mean: f64,
    pub stderr: f64,
    /// Same expectation with the maximum over the coarse nodes only.
    pub node_mean: f64,
    pub node_stderr: f64,
    pub reps: usize,
}

pub fn adjacent_level_error_table(
    p: &dyn Potential,
    x0: &[f64],
    horizon: f64,
    levels: &[u32],
    reps: usize,
    seed: u64,
) -> Result<Vec<LevelRow>> {
    let top = levels.iter().copied().max().ok_or_else(|| invalid("no levels requested"))? + 1;
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = derive_seed(seed, Stream::Replicate, 0, r as u64);
            let run = build_multilevel(p, x0, horizon, top, s)?;
            levels.iter().map(|&i| run.adjacent_level_error(p, i)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(levels
        .iter()
        .enumerate()
        .map(|(li, &level)| {
            let grid: Vec<f64> = per_rep.iter().map(|r| r[li].0).collect();
            let nodes: Vec<f64> = per_rep.iter().map(|r| r[li].1).collect();
            let (mean, stderr) = mean_stderr(&grid);
            let (node_mean, node_stderr) = mean_stderr(&nodes);
            LevelRow { level, mean, stderr, node_mean, node_stderr, reps }
        })
        .collect())
}

/// Independent standard normal coordinates, exposed for callers that build
/// their own noise.
pub fn gaussian_coords<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    standard_normal_vec(rng, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{GaussianQuadratic, VonMisesFisher, ZeroPotential};

    #[test]
    fn zero_potential_euclidean_levels_agree_at_nodes() {
        let p = ZeroPotential { manifold: Manifold::euclidean(2) };
        let run = build_multilevel(&p, &[0.0, 0.0], 1.0, 6, 9).unwrap();
        for i in 0..6 {
            let (_, nodes) = run.adjacent_level_error(&p, i).unwrap();
            assert!(nodes < 1e-24, "level {i}: {nodes}");
        }
        let end0 = run.endpoint(0);
        let end6 = run.endpoint(6);
        assert!((end0[0] - end6[0]).abs() < 1e-12 && (end0[1] - end6[1]).abs() < 1e-12);
    }

    #[test]
    fn flat_midpoint_gap_is_the_bridge_deviation() {
        let p = ZeroPotential { manifold: Manifold::euclidean(2) };
        let run = build_multilevel(&p, &[0.0, 0.0], 1.0, 3, 4).unwrap();
        let (grid, _) = run.adjacent_level_error(&p, 2).unwrap();
        let mut expect: f64 = 0.0;
        for k in 0..4u64 {
            let a = run.path.value(2, k).unwrap();
            let b = run.path.value(2, k + 1).unwrap();
            let mid = run.path.value(3, 2 * k + 1).unwrap();
            let dev: f64 = (0..2).map(|c| (mid[c] - 0.5 * (a[c] + b[c])).powi(2)).sum();
            expect = expect.max(dev);
        }
        assert!((grid - expect).abs() < 1e-14);
    }

    #[test]
    fn multilevel_nodes_stay_on_sphere_and_replay() {
        let p = VonMisesFisher::new(1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let run = build_multilevel(&p, &[1.0, 0.0, 0.0], 0.5, 7, 3).unwrap();
        for x in run.points.iter().flatten() {
            assert!(run.manifold.point_residual(x) < 1e-12);
        }
        for f in run.frames.iter().flatten() {
            assert!(run.manifold.frame_residual(f) < 1e-10);
        }
        assert_eq!(run.replay_deviation(&p).unwrap(), 0.0);
    }

    #[test]
    fn stepsize_guard() {
        let p = GaussianQuadratic { c: 2.0, mean: vec![0.0; 2] };
        let cfg = ChainConfig { stepsize: 0.5, steps: 3, seed: 1, initial: vec![0.0; 2], record_frames: false, guard: StepsizeGuard::Enforce };
        assert!(matches!(run_langevin(&p, &cfg), Err(Error::StepsizeTooLarge { .. })));
        let cfg = ChainConfig { guard: StepsizeGuard::Warn, ..cfg };
        assert!(run_langevin(&p, &cfg).is_ok());
    }

    #[test]
    fn zero_step_chain_returns_initial_point() {
        let p = VonMisesFisher::new(1.0, vec![1.0, 0.0, 0.0]).unwrap();
        let cfg = ChainConfig { stepsize: 0.01, steps: 0, seed: 1, initial: vec![0.0, 1.0, 0.0], record_frames: true, guard: StepsizeGuard::Enforce };
        let tr = run_langevin(&p, &cfg).unwrap();
        assert_eq!(tr.points, vec![vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn sgld_with_one_component_matches_langevin() {
        let o = StochasticGradOracle::gaussian_anchors(1.0, &[vec![0.5, -0.5]]).unwrap();
        let cfg = ChainConfig { stepsize: 0.01, steps: 200, seed: 5, initial: vec![1.0, 1.0], record_frames: false, guard: StepsizeGuard::Enforce };
        let a = run_sgld(&o, &cfg).unwrap();
        let b = run_langevin(&o.sum, &cfg).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn invalid_initial_point_is_rejected() {
        let p = VonMisesFisher::new(1.0, vec![1.0, 0.0, 0.0]).unwrap();
        let cfg = ChainConfig { stepsize: 0.01, steps: 3, seed: 1, initial: vec![2.0, 0.0, 0.0], record_frames: false, guard: StepsizeGuard::Enforce };
        assert!(matches!(run_langevin(&p, &cfg), Err(Error::InvalidPoint { .. })));
    }
}
