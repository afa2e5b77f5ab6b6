//! Empirical Wasserstein distances, scaling fits, tail and moment
//! statistics, and reference samplers.

pub mod assignment;
pub mod bounds;
pub mod reference;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::manifolds::Manifold;
use crate::samplers::{mean_stderr, Trajectory};

pub use assignment::Assignment;

/// Equally weighted points on a manifold.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleCloud {
    pub manifold: Manifold,
    pub points: Vec<Vec<f64>>,
}

impl SampleCloud {
    pub fn new(manifold: Manifold, points: Vec<Vec<f64>>) -> Result<Self> {
        for x in &points {
            manifold.check_point(x)?;
        }
        Ok(Self { manifold, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with a `# manifold: {json}` comment line and one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::to_string(&self.manifold).map_err(|e| invalid(e.to_string()))?;
        writeln!(w, "# manifold: {meta}")?;
        let mut wr = csv::Writer::from_writer(w);
        let n = self.manifold.ambient_dim();
        wr.write_record((0..n).map(|i| format!("x{i}")))?;
        for x in &self.points {
            wr.write_record(x.iter().map(|v| format!("{v:e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let meta = text
            .lines()
            .find_map(|l| l.strip_prefix("# manifold:"))
            .ok_or_else(|| invalid("cloud file lacks a '# manifold:' line"))?;
        let manifold: Manifold = serde_json::from_str(meta.trim()).map_err(|e| invalid(e.to_string()))?;
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let x = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| invalid(format!("bad coordinate {s:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            points.push(x);
        }
        Self::new(manifold, points)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportResult {
    pub value: f64,
    pub assignment: Assignment,
    /// Sum of all cost entries, for reproducibility checks.
    pub cost_matrix_checksum: f64,
}

fn transport_cost(a: &SampleCloud, b: &SampleCloud, power: i32) -> Result<TransportResult> {
    if a.manifold != b.manifold {
        return Err(invalid("clouds live on different manifolds"));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Err(invalid("empty clouds"));
    }
    let m = a.manifold;
    let cost: Vec<Vec<f64>> =
        a.points.iter().map(|x| b.points.iter().map(|y| m.dist(x, y).powi(power)).collect()).collect();
    let checksum = cost.iter().flatten().sum();
    let assignment = assignment::solve(&cost);
    Ok(TransportResult { value: assignment.total / a.len() as f64, assignment, cost_matrix_checksum: checksum })
}

/// Exact `W1` between equal-size empirical measures.
pub fn wasserstein1(a: &SampleCloud, b: &SampleCloud) -> Result<TransportResult> {
    transport_cost(a, b, 1)
}

/// Exact `W2^2` between equal-size empirical measures.
pub fn wasserstein2_sq(a: &SampleCloud, b: &SampleCloud) -> Result<TransportResult> {
    transport_cost(a, b, 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line through `(x, y)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(invalid("a fit needs at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("degenerate abscissae"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit { slope, intercept: my - slope * mx, r2 })
}

/// Fit of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub fraction: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Fraction of trajectories whose running maximum of `d(x_k, x*)` exceeds
/// `r` (strictly).
pub fn tail_exceedance(m: &Manifold, trajectories: &[Trajectory], x_star: &[f64], r: f64) -> Proportion {
    let hits = trajectories
        .iter()
        .filter(|t| t.points.iter().any(|x| m.dist(x, x_star) > r))
        .count();
    let n = trajectories.len();
    let f = hits as f64 / n as f64;
    Proportion { fraction: f, stderr: (f * (1.0 - f) / n as f64).sqrt(), n }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub mean_d2: f64,
    pub stderr_d2: f64,
    pub mean_d4: f64,
    pub stderr_d4: f64,
}

/// Second and fourth moments of `d(x_K, x*)` over final points.
pub fn moment_stats(m: &Manifold, finals: &[Vec<f64>], x_star: &[f64]) -> MomentStats {
    let d2: Vec<f64> = finals.iter().map(|x| m.dist(x, x_star).powi(2)).collect();
    let d4: Vec<f64> = d2.iter().map(|v| v * v).collect();
    let (mean_d2, stderr_d2) = mean_stderr(&d2);
    let (mean_d4, stderr_d4) = mean_stderr(&d4);
    MomentStats { mean_d2, stderr_d2, mean_d4, stderr_d4 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == cost.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    rec(cost, row + 1, used, acc + cost[row][j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
        best
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let m = Manifold::sphere(3);
        let c = SampleCloud::new(m, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let r = wasserstein1(&c, &c).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.assignment.col_of_row, vec![0, 1]);
    }

    #[test]
    fn single_points_give_geodesic_distance() {
        let m = Manifold::sphere(3);
        let a = SampleCloud::new(m, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let b = SampleCloud::new(m, vec![vec![0.0, 0.0, 1.0]]).unwrap();
        assert!((wasserstein1(&a, &b).unwrap().value - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_clouds_are_rejected() {
        let a = SampleCloud::new(Manifold::euclidean(1), vec![vec![0.0]]).unwrap();
        let b = SampleCloud::new(Manifold::euclidean(1), vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(wasserstein1(&a, &b).is_err());
        let c = SampleCloud::new(Manifold::euclidean(2), vec![vec![0.0, 0.0]]).unwrap();
        assert!(wasserstein1(&a, &c).is_err());
    }

    #[test]
    fn solver_matches_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for n in 1..=6 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
                let a = assignment::solve(&cost);
                assert!((a.total - brute_force(&cost)).abs() < 1e-12);
                assert!(a.certificate_residual(&cost) < 1e-12);
            }
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        let f = loglog_slope(&xs, &ys).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cloud_csv_roundtrip() {
        let m = Manifold::hyperboloid(2);
        let x = m.exp(&m.base_point(), &[0.0, 0.3, -1.2]);
        let c = SampleCloud::new(m, vec![m.base_point(), x]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = SampleCloud::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn tail_of_static_chain() {
        let m = Manifold::euclidean(1);
        let t = Trajectory { stepsize: 0.1, points: vec![vec![0.0], vec![0.0]], frames: None };
        assert_eq!(tail_exceedance(&m, std::slice::from_ref(&t), &[0.0], 0.0).fraction, 0.0);
        let moved = Trajectory { points: vec![vec![0.0], vec![0.5]], ..t };
        assert_eq!(tail_exceedance(&m, &[moved], &[0.0], 0.0).fraction, 1.0);
    }
}
