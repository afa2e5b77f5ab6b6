//! Jacobi fields along `t -> Exp_x(t w)`, integrated in a parallel frame,
//! and the growth and transport-residual bounds they satisfy.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix_ode::{emat_grid, MatrixPath, EMAT_STEP};
use super::{merge_reports, random_point, tangent_with_norm, Check};
use crate::error::Result;
use crate::manifolds::{axpy, Frame, Geodesic, Manifold};
use crate::noise::{keyed_rng, Stream};

/// Geodesic `t -> Exp_x(t w)` on `[0, 1]` with initial Jacobi data
/// `J(0) = j0`, `D_t J(0) = k0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiSetup {
    pub manifold: Manifold,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub j0: Vec<f64>,
    pub k0: Vec<f64>,
}

impl JacobiSetup {
    pub fn validate(&self) -> Result<()> {
        let m = &self.manifold;
        m.check_point(&self.x)?;
        for v in [&self.w, &self.j0, &self.k0] {
            m.check_tangent(&self.x, v)?;
        }
        Ok(())
    }

    fn geodesic(&self) -> Geodesic {
        self.manifold.geodesic_from(&self.x, &self.w)
    }
}

/// `M_ij(t) = -<R(E_j, gamma'), gamma') E_i>` in a parallel frame.
pub struct JacobiMatrix {
    manifold: Manifold,
    geodesic: Geodesic,
    frame: Frame,
    l_r: f64,
}

impl JacobiMatrix {
    pub fn new(setup: &JacobiSetup) -> Self {
        let m = setup.manifold;
        Self {
            manifold: m,
            geodesic: setup.geodesic(),
            frame: m.gram_schmidt_frame(&setup.x),
            l_r: m.curvature_bounds().l_r,
        }
    }

    /// Frame vectors transported to `gamma(t)`.
    pub fn frame_at(&self, t: f64) -> Frame {
        let vs: Vec<Vec<f64>> = self.frame.vectors().map(|e| self.geodesic.transport_partial(t, e)).collect();
        Frame::from_vectors(&vs)
    }
}

impl MatrixPath for JacobiMatrix {
    fn dim(&self) -> usize {
        self.frame.len()
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        let m = &self.manifold;
        let x = self.geodesic.point_at(t);
        let vel = self.geodesic.velocity_at(t);
        let e = self.frame_at(t);
        let d = e.len();
        DMatrix::from_fn(d, d, |i, j| -m.inner(&m.curvature_op(&x, e.vector(j), &vel, &vel), e.vector(i)))
    }

    fn l_m(&self) -> f64 {
        self.l_r * self.geodesic.length().powi(2)
    }

    fn l_m_prime(&self) -> f64 {
        2.0 * self.l_m()
    }
}

/// `J(t)` and `D_t J(t)` as ambient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiState {
    pub t: f64,
    pub j: Vec<f64>,
    pub k: Vec<f64>,
}

/// Integrate the Jacobi equation in coordinates, `J' = K`, `K' = M J`,
/// through the block matrix exponent, at each time of `ts`.
pub fn integrate_jacobi(setup: &JacobiSetup, ts: &[f64]) -> Result<Vec<JacobiState>> {
    setup.validate()?;
    let m = setup.manifold;
    let path = JacobiMatrix::new(setup);
    let jc = DVector::from_vec(m.frame_coords(&path.frame, &setup.j0));
    let kc = DVector::from_vec(m.frame_coords(&path.frame, &setup.k0));
    let blocks = emat_grid(&path, ts, EMAT_STEP)?;
    Ok(blocks
        .iter()
        .zip(ts)
        .map(|(b, &t)| {
            let e = path.frame_at(t);
            let jt = &b.a * &jc + &b.b * &kc;
            let kt = &b.c * &jc + &b.d * &kc;
            JacobiState { t, j: e.combine(jt.as_slice()), k: e.combine(kt.as_slice()) }
        })
        .collect())
}

/// Closed form on the unit sphere and the hyperboloid (sectional curvature
/// `+1` and `-1`) and in flat space.
pub fn jacobi_closed_form(setup: &JacobiSetup, t: f64) -> JacobiState {
    let m = setup.manifold;
    let g = setup.geodesic();
    let theta = g.length();
    let e = g.direction();
    let a = m.inner(&setup.j0, e);
    let b = m.inner(&setup.k0, e);
    let mut j_perp = setup.j0.clone();
    axpy(-a, e, &mut j_perp);
    let mut k_perp = setup.k0.clone();
    axpy(-b, e, &mut k_perp);
    let (c, s_over, neg_s) = match m {
        Manifold::Euclidean { .. } => (1.0, t, 0.0),
        Manifold::Sphere { .. } => {
            let (s, c) = (theta * t).sin_cos();
            let so = if theta > 0.0 { s / theta } else { t };
            (c, so, -theta * s)
        }
        Manifold::Hyperboloid { .. } => {
            let (s, c) = ((theta * t).sinh(), (theta * t).cosh());
            let so = if theta > 0.0 { s / theta } else { t };
            (c, so, theta * s)
        }
    };
    let mut j = vec![0.0; e.len()];
    let mut k = vec![0.0; e.len()];
    if theta > 0.0 {
        axpy(a + b * t, e, &mut j);
        axpy(b, e, &mut k);
        axpy(c, &j_perp, &mut j);
        axpy(s_over, &k_perp, &mut j);
        axpy(neg_s, &j_perp, &mut k);
        axpy(c, &k_perp, &mut k);
    } else {
        // Constant geodesic: no curvature term.
        axpy(1.0, &setup.j0, &mut j);
        axpy(t, &setup.k0, &mut j);
        axpy(1.0, &setup.k0, &mut k);
    }
    JacobiState { t, j: g.transport_partial(t, &j), k: g.transport_partial(t, &k) }
}

/// `J(t)` by central differences of the geodesic variation
/// `Lambda(s, t) = Exp_{c(s)}(t W(s))`, `c(s) = Exp_x(s J0)`,
/// `W(s)` the transport of `w + s K0` along `c`.
pub fn jacobi_finite_difference(setup: &JacobiSetup, t: f64, h: f64) -> Vec<f64> {
    let m = setup.manifold;
    let c = m.geodesic_from(&setup.x, &setup.j0);
    let lambda = |s: f64| {
        let base = c.point_at(s);
        let mut w = setup.w.clone();
        axpy(s, &setup.k0, &mut w);
        let ws = c.transport_partial(s, &w);
        let tw: Vec<f64> = ws.iter().map(|v| v * t).collect();
        m.exp(&base, &tw)
    };
    let (p, q) = (lambda(h), lambda(-h));
    p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn sinhc(c: f64) -> f64 {
    if c == 0.0 {
        1.0
    } else {
        c.sinh() / c
    }
}

/// The Jacobi bounds on a time grid with `C = sqrt(L_R) |w|`. The sixth
/// check uses the declared derivative bound `l_r_prime`.
pub fn check_jacobi_bounds(setup: &JacobiSetup, l_r: f64, l_r_prime: f64, ts: &[f64], trial: usize) -> Result<Vec<Check>> {
    let m = setup.manifold;
    let g = setup.geodesic();
    let states = integrate_jacobi(setup, ts)?;
    let wn = g.length();
    let c = l_r.sqrt() * wn;
    let j0 = m.norm(&setup.j0);
    let k0 = m.norm(&setup.k0);
    let acc0 = {
        let r = m.curvature_op(&setup.x, &setup.j0, &setup.w, &setup.w);
        r.iter().map(|v| -v).collect::<Vec<f64>>()
    };
    let third = l_r_prime * wn.powi(3);
    let names = [
        "|J(t)| growth",
        "|J(t) - P(J0 + t K0)|",
        "|J(t) - P J0|",
        "|D_t J(t)| growth",
        "|D_t J(t) - P K0|",
        "|D_t J(t) - P K0 - t P D_t K0|",
    ];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(*n)).collect();
    let diff_norm = |a: &[f64], b: &[f64]| {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        m.norm(&d)
    };
    for st in &states {
        let t = st.t;
        let mut lin = setup.j0.clone();
        axpy(t, &setup.k0, &mut lin);
        let p_lin = g.transport_partial(t, &lin);
        let p_j0 = g.transport_partial(t, &setup.j0);
        let p_k0 = g.transport_partial(t, &setup.k0);
        let mut k_lin = setup.k0.clone();
        axpy(t, &acc0, &mut k_lin);
        let p_klin = g.transport_partial(t, &k_lin);
        let rows = [
            (m.norm(&st.j), c.cosh() * j0 + sinhc(c) * k0),
            (diff_norm(&st.j, &p_lin), (c.cosh() - 1.0) * j0 + (sinhc(c) - 1.0) * k0),
            (diff_norm(&st.j, &p_j0), (c.cosh() - 1.0) * j0 + sinhc(c) * k0),
            (m.norm(&st.k), c * c.sinh() * j0 + c.cosh() * k0),
            (diff_norm(&st.k, &p_k0), c * c.sinh() * j0 + (c.cosh() - 1.0) * k0),
            (diff_norm(&st.k, &p_klin), (third + c.powi(4)) * c.exp() * j0 + (third + c * c) * c.exp() * k0),
        ];
        for (ch, (lhs, rhs)) in checks.iter_mut().zip(rows) {
            ch.record(trial, lhs, rhs);
        }
    }
    Ok(checks)
}

/// Random setup with `|w| <= w_max` and `|J0|, |K0| <= 1`.
pub fn random_setup<R: Rng + ?Sized>(m: &Manifold, w_max: f64, rng: &mut R) -> JacobiSetup {
    let x = random_point(m, 0.7, rng);
    let w = tangent_with_norm(m, &x, w_max * rng.random::<f64>(), rng);
    let j0 = tangent_with_norm(m, &x, rng.random::<f64>(), rng);
    let k0 = tangent_with_norm(m, &x, rng.random::<f64>(), rng);
    JacobiSetup { manifold: *m, x, w, j0, k0 }
}

/// Options for randomized suites and their negative controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    /// Declared `L_R` in place of the manifold's own bound.
    pub l_r_override: Option<f64>,
}

/// Jacobi bounds over `trials` random setups on a grid of 11 times.
pub fn jacobi_suite(m: &Manifold, trials: usize, w_max: f64, seed: u64, opts: SuiteOptions) -> Result<Vec<Check>> {
    let cb = m.curvature_bounds();
    let l_r = opts.l_r_override.unwrap_or(cb.l_r);
    let ts: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
    let reports = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, Stream::Probe, i as u64, 0);
            let setup = random_setup(m, w_max, &mut rng);
            check_jacobi_bounds(&setup, l_r, cb.l_r_prime, &ts, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_reports(reports))
}
