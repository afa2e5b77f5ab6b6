//! Stepsize scans: W1 distance to an exact reference cloud, the SGLD gap to
//! the exact-gradient chain, and the running-maximum tail check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::bounds::TailConstants;
use crate::diagnostics::reference::sample_vmf;
use crate::diagnostics::{loglog_slope, wasserstein1, Proportion, SampleCloud, SlopeFit};
use crate::error::{invalid, Result};
use crate::manifolds::{dot, sub};
use crate::noise::{derive_seed, keyed_rng, standard_normal_vec, Stream};
use crate::potentials::{Potential, StochasticGradOracle, VonMisesFisher};
use crate::samplers::{build_multilevel, mean_stderr, run_langevin, run_sgld, ChainConfig, StepsizeGuard};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Row {
    pub delta: f64,
    pub level: u32,
    pub w1: f64,
    pub stderr: f64,
    /// Mean paired difference to the finest level.
    pub excess: f64,
    pub excess_stderr: f64,
    pub reps: usize,
}

/// `W1(Law(x_K), pi)` for vMF targets on the sphere, estimated against an
/// exact vMF cloud of the same size.
///
/// Every sample runs all stepsizes `horizon / 2^level` along one Brownian
/// path (the multilevel construction), so the rows are strongly coupled and
/// the excess over the finest row has small variance. Starts are exact
/// draws from the target.
pub fn w1_stepsize_table(
    p: &VonMisesFisher,
    horizon: f64,
    deltas: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<W1Row>> {
    if deltas.is_empty() || n == 0 || reps == 0 {
        return Err(invalid("w1 scan needs stepsizes, samples and replicates"));
    }
    let mut levels = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let l = (horizon / d).log2().round();
        if !(0.0..=14.0).contains(&l) || (horizon / 2f64.powf(l) - d).abs() > 1e-12 * d {
            return Err(invalid(format!("stepsize {d} is not horizon / 2^level for level <= 14")));
        }
        levels.push(l as u32);
    }
    let finest = levels.iter().copied().enumerate().max_by_key(|&(_, l)| l).map(|(i, _)| i).unwrap();
    let top = levels[finest];
    let m = p.manifold();
    let mut per_rep: Vec<Vec<f64>> = Vec::with_capacity(reps);
    for rep in 0..reps as u64 {
        let s = derive_seed(seed, Stream::Replicate, rep, 0);
        let mut rr = keyed_rng(s, Stream::Reference, 0, 0);
        let reference = (0..n).map(|_| sample_vmf(p.kappa, &p.mu, &mut rr)).collect::<Result<Vec<_>>>()?;
        let ends = (0..n as u64)
            .into_par_iter()
            .map(|j| {
                let mut ri = keyed_rng(s, Stream::Initial, j, 0);
                let x0 = sample_vmf(p.kappa, &p.mu, &mut ri)?;
                let run = build_multilevel(p, &x0, horizon, top, derive_seed(s, Stream::Replicate, j, 1))?;
                Ok(levels.iter().map(|&l| run.endpoint(l).to_vec()).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let rc = SampleCloud::new(m, reference)?;
        let row = (0..levels.len())
            .into_par_iter()
            .map(|li| {
                let c = SampleCloud::new(m, ends.iter().map(|e| e[li].clone()).collect())?;
                Ok(wasserstein1(&c, &rc)?.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        per_rep.push(row);
    }
    Ok(levels
        .iter()
        .enumerate()
        .map(|(li, &level)| {
            let w: Vec<f64> = per_rep.iter().map(|r| r[li]).collect();
            let ex: Vec<f64> = per_rep.iter().map(|r| r[li] - r[finest]).collect();
            let (w1, stderr) = mean_stderr(&w);
            let (excess, excess_stderr) = mean_stderr(&ex);
            W1Row { delta: deltas[li], level, w1, stderr, excess, excess_stderr, reps }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct W1Summary {
    /// Log-log fit of the excess against `delta` over the non-finest rows.
    pub fit: Option<SlopeFit>,
    /// Rows (by delta, increasing) where `W1` rose above the next larger
    /// stepsize by more than two standard errors.
    pub monotone_violations: Vec<f64>,
}

pub fn summarize_w1(rows: &[W1Row]) -> W1Summary {
    let mut sorted: Vec<&W1Row> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let fitted: Vec<&W1Row> = sorted.iter().skip(1).copied().collect();
    let fit = loglog_slope(
        &fitted.iter().map(|r| r.delta).collect::<Vec<_>>(),
        &fitted.iter().map(|r| r.excess).collect::<Vec<_>>(),
    )
    .ok();
    let monotone_violations = sorted
        .windows(2)
        .filter(|w| {
            let se = w[0].stderr.hypot(w[1].stderr);
            w[0].w1 > w[1].w1 + 2.0 * se
        })
        .map(|w| w[0].delta)
        .collect();
    W1Summary { fit, monotone_violations }
}

/// Anchors `a_1..a_n` in `R^d` with zero mean, drawn from `N(0, scale^2 I)`.
pub fn centered_anchors(n: usize, d: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = keyed_rng(seed, Stream::Probe, 0, 3);
    let mut a: Vec<Vec<f64>> =
        (0..n).map(|_| standard_normal_vec(&mut rng, d).into_iter().map(|v| scale * v).collect()).collect();
    let mean: Vec<f64> = (0..d).map(|k| a.iter().map(|x| x[k]).sum::<f64>() / n as f64).collect();
    for x in &mut a {
        for (v, m) in x.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub delta: f64,
    pub steps: usize,
    pub gap: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// `E d(x_K^sgld, x_K)^2` for paired chains sharing their Gaussian noise,
/// `K = ceil(horizon / delta)`, both started at `x0`.
pub fn sgld_gap_table(
    oracle: &StochasticGradOracle,
    x0: &[f64],
    horizon: f64,
    deltas: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<GapRow>> {
    let m = oracle.sum.manifold();
    deltas
        .iter()
        .enumerate()
        .map(|(di, &delta)| {
            let steps = (horizon / delta).ceil() as usize;
            let gaps = (0..reps as u64)
                .into_par_iter()
                .map(|r| {
                    let cfg = ChainConfig {
                        stepsize: delta,
                        steps,
                        seed: derive_seed(seed, Stream::Replicate, di as u64, r),
                        initial: x0.to_vec(),
                        record_frames: false,
                        guard: StepsizeGuard::Warn,
                    };
                    let a = run_sgld(oracle, &cfg)?;
                    let b = run_langevin(&oracle.sum, &cfg)?;
                    Ok(m.dist(a.last(), b.last()).powi(2))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (gap, stderr) = mean_stderr(&gaps);
            Ok(GapRow { delta, steps, gap, stderr, reps })
        })
        .collect()
}

/// Exact `E|x_K^sgld - x_K|^2` for components `c/2 |x - a_i|^2`: the gap
/// obeys `e' = (1 - delta c/2) e + delta xi` with `xi` uniform over
/// `(c/2)(a_i - mean a)` and `e_0 = 0`.
pub fn gaussian_gap(c: f64, anchors: &[Vec<f64>], delta: f64, steps: usize) -> f64 {
    let n = anchors.len() as f64;
    let d = anchors.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d).map(|k| anchors.iter().map(|a| a[k]).sum::<f64>() / n).collect();
    let var = anchors.iter().map(|a| dot(&sub(a, &mean), &sub(a, &mean))).sum::<f64>() / n;
    let rho = 1.0 - 0.5 * delta * c;
    let r2 = rho * rho;
    let geometric = if r2 == 1.0 { steps as f64 } else { (1.0 - r2.powi(steps as i32)) / (1.0 - r2) };
    delta * delta * 0.25 * c * c * var * geometric
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub radius: f64,
    pub bound: f64,
    pub observed: Proportion,
    /// Largest stepsize under which the bound is stated at this radius.
    pub max_stepsize: f64,
    /// Largest running distance seen over all seeds.
    pub max_distance: f64,
}

impl TailReport {
    /// Observed fraction within the bound plus three binomial standard
    /// errors, the standard error taken at the bound itself.
    pub fn passed(&self) -> bool {
        let p = self.bound.min(1.0);
        let se = (p * (1.0 - p) / self.observed.n as f64).sqrt();
        self.observed.fraction <= self.bound + 3.0 * se
    }
}

/// Fraction of SGLD runs whose running maximum of `d(x_k, x*)` exceeds the
/// radius at which the tail bound equals `level`.
#[allow(clippy::too_many_arguments)]
pub fn tail_check(
    oracle: &StochasticGradOracle,
    constants: &TailConstants,
    x_star: &[f64],
    steps: usize,
    delta: f64,
    level: f64,
    seeds: usize,
    seed: u64,
) -> Result<TailReport> {
    let m = oracle.sum.manifold();
    let radius = constants.radius_for_level(steps, delta, level);
    let maxima = (0..seeds as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = ChainConfig {
                stepsize: delta,
                steps,
                seed: derive_seed(seed, Stream::Replicate, r, 0),
                initial: x_star.to_vec(),
                record_frames: false,
                guard: StepsizeGuard::Warn,
            };
            let t = run_sgld(oracle, &cfg)?;
            Ok(t.points.iter().map(|x| m.dist(x, x_star)).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let hits = maxima.iter().filter(|&&d| d > radius).count();
    let n = maxima.len();
    let f = hits as f64 / n as f64;
    Ok(TailReport {
        radius,
        bound: constants.tail_bound(steps, delta, radius),
        observed: Proportion { fraction: f, stderr: (f * (1.0 - f) / n as f64).sqrt(), n },
        max_stepsize: constants.max_stepsize(radius),
        max_distance: maxima.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_are_centered() {
        let a = centered_anchors(10, 4, 1.0, 3);
        for k in 0..4 {
            assert!(a.iter().map(|x| x[k]).sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn gap_matches_closed_form() {
        let anchors = centered_anchors(10, 4, 1.0, 5);
        let o = StochasticGradOracle::gaussian_anchors(1.0, &anchors).unwrap();
        let rows = sgld_gap_table(&o, &[0.0; 4], 4.0, &[0.125, 0.0625], 2000, 8).unwrap();
        for r in rows {
            let exact = gaussian_gap(1.0, &anchors, r.delta, r.steps);
            assert!((r.gap - exact).abs() < 4.0 * r.stderr, "{r:?}");
        }
    }

    #[test]
    fn single_component_has_no_gap() {
        let o = StochasticGradOracle::gaussian_anchors(1.0, &[vec![0.5, -0.5]]).unwrap();
        let rows = sgld_gap_table(&o, &[0.0; 2], 1.0, &[0.1], 20, 1).unwrap();
        assert_eq!(rows[0].gap, 0.0);
    }

    #[test]
    fn tail_radius_zero_is_always_exceeded() {
        let o = StochasticGradOracle::gaussian_anchors(1.0, &centered_anchors(4, 2, 1.0, 2)).unwrap();
        let c = TailConstants { m: 0.5, l_beta: 0.5, radius: 0.0, l_r: 0.0, d: 2.0, sigma: o.sigma };
        // A level above the bound at r = 0 drives the radius to zero.
        let rep = tail_check(&o, &c, &[0.0, 0.0], 50, 0.01, 1e9, 20, 1).unwrap();
        assert_eq!(rep.radius, 0.0);
        assert_eq!(rep.observed.fraction, 1.0);
    }

    #[test]
    fn w1_rows_are_paired_and_finite() {
        let p = VonMisesFisher::new(4.0, vec![0.0, 0.0, 1.0]).unwrap();
        let rows = w1_stepsize_table(&p, 1.0, &[0.25, 0.125, 0.03125], 32, 2, 3).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].excess, 0.0);
        assert!(rows.iter().all(|r| r.w1.is_finite() && r.w1 > 0.0));
        assert!(w1_stepsize_table(&p, 1.0, &[0.3], 8, 1, 1).is_err());
    }
}
