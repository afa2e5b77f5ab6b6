//! Distance after exponential-map steps: triangle distortion, the
//! two-point expansions behind synchronous coupling, and the comparison
//! inequality with `zeta(r) = r / tanh r`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{merge_reports, random_point, tangent_with_norm, Check};
use crate::error::{invalid, Result};
use crate::manifolds::{axpy, Manifold};
use crate::noise::{keyed_rng, Stream};
use crate::numerics::gauss_legendre;

/// Quadrature nodes for the curvature integral along the connecting geodesic.
pub const CURVATURE_NODES: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    /// Declared `L_R` in place of the manifold's own bound.
    pub l_r_override: Option<f64>,
    /// Leave the curvature integral out of the refined two-point bound.
    pub drop_curvature_integral: bool,
}

fn declared(m: &Manifold, opts: DistanceOptions) -> (f64, f64) {
    let cb = m.curvature_bounds();
    (opts.l_r_override.unwrap_or(cb.l_r), cb.l_r_prime)
}

/// `zeta(r) = r / tanh r`, `zeta(0) = 1`.
pub fn zeta(r: f64) -> f64 {
    if r.abs() < 1e-8 {
        1.0 + r * r / 3.0
    } else {
        r / r.tanh()
    }
}

/// `(lhs, rhs)` of
/// `d(Exp_x(y + a), Exp_{Exp_x a}(P y)) <= L_R |a||y|(|a|+|y|) e^{sqrt(L_R)(|a|+|y|)}`,
/// with `P` the transport along `s -> Exp_x(s a)`.
pub fn triangle_distortion(m: &Manifold, x: &[f64], a: &[f64], y: &[f64], l_r: f64) -> (f64, f64) {
    let mut ya = y.to_vec();
    axpy(1.0, a, &mut ya);
    let lhs_point = m.exp(x, &ya);
    let g = m.geodesic_from(x, a);
    let xa = g.point_at(1.0);
    let py = g.transport(y);
    let rhs_point = m.exp(&xa, &py);
    let (na, ny) = (m.norm(a), m.norm(y));
    let lhs = m.dist(&lhs_point, &rhs_point);
    let rhs = l_r * na * ny * (na + ny) * (l_r.sqrt() * (na + ny)).exp();
    (lhs, rhs)
}

pub fn triangle_suite(m: &Manifold, trials: usize, seed: u64, opts: DistanceOptions) -> Result<Vec<Check>> {
    check_curved(m)?;
    let (l_r, _) = declared(m, opts);
    let reports: Vec<Vec<Check>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, Stream::Probe, i as u64, 1);
            let x = random_point(m, 0.7, &mut rng);
            let total: f64 = rng.random();
            let split: f64 = rng.random();
            let a = tangent_with_norm(m, &x, total * split, &mut rng);
            let y = tangent_with_norm(m, &x, total * (1.0 - split), &mut rng);
            let (lhs, rhs) = triangle_distortion(m, &x, &a, &y, l_r);
            let mut c = Check::new("triangle distortion");
            c.record(i, lhs, rhs);
            vec![c]
        })
        .collect();
    Ok(merge_reports(reports))
}

/// One two-point configuration: steps `u` at `x` and `v` at `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Terms shared by the two-point bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoPointTerms {
    /// `d(Exp_x u, Exp_y v)^2`.
    pub after_sq: f64,
    /// `d(x, y)`.
    pub d: f64,
    /// `<gamma'(0), v(0) - u>`.
    pub cross: f64,
    /// `|v(0) - u|`.
    pub gap: f64,
    /// `int_0^1 <R(gamma', w) w, gamma'> ds`, `w = (1-s) u(s) + s v(s)`.
    pub curvature_integral: f64,
    pub c: f64,
    pub c_prime: f64,
}

pub fn two_point_terms(m: &Manifold, tp: &TwoPoint, l_r: f64, l_r_prime: f64) -> TwoPointTerms {
    let g = m.geodesic(&tp.x, &tp.y);
    let back = m.geodesic(&tp.y, &tp.x);
    let v0 = back.transport(&tp.v);
    let vel0 = g.velocity();
    let mut delta = v0.clone();
    axpy(-1.0, &tp.u, &mut delta);
    let (nodes, weights) = gauss_legendre(CURVATURE_NODES);
    let curvature_integral: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(z, wt)| {
            let s = 0.5 * (z + 1.0);
            let vel = g.velocity_at(s);
            let us = g.transport_partial(s, &tp.u);
            let vs = g.transport_partial(s, &v0);
            let mut w = us.iter().map(|c| (1.0 - s) * c).collect::<Vec<f64>>();
            axpy(s, &vs, &mut w);
            let p = g.point_at(s);
            0.5 * wt * m.inner(&m.curvature_op(&p, &vel, &w, &w), &vel)
        })
        .sum();
    let (nu, nv) = (m.norm(&tp.u), m.norm(&tp.v));
    let after = m.dist(&m.exp(&tp.x, &tp.u), &m.exp(&tp.y, &tp.v));
    TwoPointTerms {
        after_sq: after * after,
        d: g.length(),
        cross: m.inner(&vel0, &delta),
        gap: m.norm(&delta),
        curvature_integral,
        c: l_r.sqrt() * (nu + nv),
        c_prime: l_r_prime * (nu + nv).powi(3),
    }
}

/// `(lhs, rhs)` of the first-order bound
/// `d'^2 <= (1 + 4C^2 e^{4C}) d^2 + 32 e^C |v(0)-u|^2 + 2 <gamma'(0), v(0)-u>`.
pub fn sync_bound(t: &TwoPointTerms) -> (f64, f64) {
    let c = t.c;
    let rhs = (1.0 + 4.0 * c * c * (4.0 * c).exp()) * t.d * t.d + 32.0 * c.exp() * t.gap * t.gap + 2.0 * t.cross;
    (t.after_sq, rhs)
}

/// `(lhs, rhs)` of the refined bound on `d'^2 - d^2` with the curvature
/// integral along the connecting geodesic.
pub fn ricci_bound(t: &TwoPointTerms, with_integral: bool) -> (f64, f64) {
    let c = t.c;
    let (g2, d2) = (t.gap * t.gap, t.d * t.d);
    let integral = if with_integral { t.curvature_integral } else { 0.0 };
    let rhs = 2.0 * t.cross + g2 - integral
        + (2.0 * c * c * c.exp() + 18.0 * c.powi(4) * (2.0 * c).exp()) * g2
        + (18.0 * c.powi(4) * (2.0 * c).exp() + 4.0 * t.c_prime) * d2
        + 4.0 * c * c * (2.0 * c).exp() * t.d * t.gap;
    (t.after_sq - d2, rhs)
}

/// `(lhs, rhs)` of `d(z, x)^2 <= d(y, x)^2 - 2<v, u> + zeta(sqrt(L_R) d(y, x)) |v|^2`
/// for `x = Exp_y u` along a minimizing geodesic and `z = Exp_y v`.
pub fn zhang_bound(m: &Manifold, y: &[f64], u: &[f64], v: &[f64], l_r: f64) -> (f64, f64) {
    let x = m.exp(y, u);
    let z = m.exp(y, v);
    let du = m.norm(u);
    let lhs = m.dist(&z, &x).powi(2);
    let rhs = du * du - 2.0 * m.inner(v, u) + zeta(l_r.sqrt() * du) * m.inner(v, v);
    (lhs, rhs)
}

fn check_curved(m: &Manifold) -> Result<()> {
    if matches!(m, Manifold::Euclidean { .. }) || m.intrinsic_dim() < 2 {
        return Err(invalid("distance suites run on spheres and hyperboloids of dimension >= 2"));
    }
    Ok(())
}

/// Random two-point configuration with `d(x, y) <= d_max` and
/// `|u| + |v| <= step_max`.
pub fn random_two_point<R: Rng + ?Sized>(m: &Manifold, d_max: f64, step_max: f64, rng: &mut R) -> TwoPoint {
    let x = random_point(m, 0.7, rng);
    let dir = tangent_with_norm(m, &x, d_max * rng.random::<f64>(), rng);
    let y = m.exp(&x, &dir);
    let total = step_max * rng.random::<f64>();
    let split: f64 = rng.random();
    let u = tangent_with_norm(m, &x, total * split, rng);
    // Half the trials take v near the transport of u (synchronous moves).
    let v = if rng.random::<bool>() {
        let mut v = m.transport(&x, &y, &u);
        let noise = tangent_with_norm(m, &y, 0.1 * total * rng.random::<f64>(), rng);
        axpy(1.0, &noise, &mut v);
        let n = m.norm(&v);
        let cap = total * (1.0 - split);
        if n > cap && n > 0.0 {
            v.iter_mut().for_each(|c| *c *= cap / n);
        }
        v
    } else {
        tangent_with_norm(m, &y, total * (1.0 - split), rng)
    };
    TwoPoint { x, y, u, v }
}

/// The first-order, refined, and `zeta` two-point bounds over random trials
/// with `|u| + |v| <= step_max`.
pub fn two_point_suite(
    m: &Manifold,
    trials: usize,
    step_max: f64,
    seed: u64,
    opts: DistanceOptions,
) -> Result<Vec<Check>> {
    check_curved(m)?;
    let (l_r, l_r_prime) = declared(m, opts);
    let reports: Vec<Vec<Check>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, Stream::Probe, i as u64, 2);
            let tp = random_two_point(m, 1.5, step_max, &mut rng);
            let terms = two_point_terms(m, &tp, l_r, l_r_prime);
            let mut sync = Check::new("two-point first order");
            let (l, r) = sync_bound(&terms);
            sync.record(i, l, r);
            let mut ric = Check::new("two-point with curvature integral");
            let (l, r) = ricci_bound(&terms, !opts.drop_curvature_integral);
            ric.record(i, l, r);
            let mut zh = Check::new("zeta comparison");
            let base = random_point(m, 0.7, &mut rng);
            let u = tangent_with_norm(m, &base, 1.5 * rng.random::<f64>(), &mut rng);
            let v = tangent_with_norm(m, &base, 2.0 * rng.random::<f64>(), &mut rng);
            let (l, r) = zhang_bound(m, &base, &u, &v, l_r);
            zh.record(i, l, r);
            vec![sync, ric, zh]
        })
        .collect();
    Ok(merge_reports(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lemma_lab::all_passed;

    #[test]
    fn triangle_degenerate_cases() {
        let m = Manifold::sphere(3);
        let x = [1.0, 0.0, 0.0];
        let (lhs, _) = triangle_distortion(&m, &x, &[0.0; 3], &[0.0, 0.3, 0.2], 1.0);
        assert!(lhs < 1e-15);
        let (lhs, _) = triangle_distortion(&m, &x, &[0.0, 0.2, 0.1], &[0.0, 0.4, 0.2], 1.0);
        assert!(lhs < 1e-9);
    }

    #[test]
    fn flat_identity() {
        let m = Manifold::euclidean(3);
        let tp = TwoPoint { x: vec![0.0, 0.0, 0.0], y: vec![1.0, 2.0, 0.0], u: vec![0.3, 0.0, 0.1], v: vec![-0.2, 0.5, 0.0] };
        let t = two_point_terms(&m, &tp, 0.0, 0.0);
        let diff: Vec<f64> = tp.v.iter().zip(&tp.u).map(|(a, b)| a - b).collect();
        let expect = t.d * t.d + 2.0 * t.cross + diff.iter().map(|c| c * c).sum::<f64>();
        assert!((t.after_sq - expect).abs() < 1e-13);
        assert_eq!(t.curvature_integral, 0.0);
    }

    #[test]
    fn coincident_points_with_parallel_steps() {
        let m = Manifold::sphere(3);
        let x = vec![0.0, 1.0, 0.0];
        let u = vec![0.2, 0.0, -0.1];
        let tp = TwoPoint { x: x.clone(), y: x, u: u.clone(), v: u };
        let t = two_point_terms(&m, &tp, 1.0, 0.0);
        assert!(t.after_sq < 1e-28);
        assert!(sync_bound(&t).1 >= sync_bound(&t).0);
        assert!(ricci_bound(&t, true).1 >= ricci_bound(&t, true).0);
    }

    #[test]
    fn random_suites_pass() {
        for m in [Manifold::sphere(3), Manifold::hyperboloid(2), Manifold::sphere(4), Manifold::hyperboloid(3)] {
            let tri = triangle_suite(&m, 300, 1, DistanceOptions::default()).unwrap();
            let two = two_point_suite(&m, 300, 0.5, 1, DistanceOptions::default()).unwrap();
            assert!(all_passed(&tri), "{} {tri:?}", m.name());
            assert!(all_passed(&two), "{} {two:?}", m.name());
        }
    }

    #[test]
    fn flat_constants_fail_on_hyperbolic_space() {
        let m = Manifold::hyperboloid(2);
        let lie = DistanceOptions { l_r_override: Some(0.0), ..Default::default() };
        assert!(!all_passed(&triangle_suite(&m, 200, 2, lie).unwrap()));
        let two = two_point_suite(&m, 200, 0.5, 2, lie).unwrap();
        assert!(two[0].violations > 0 && two[2].violations > 0, "{two:?}");
    }
}
