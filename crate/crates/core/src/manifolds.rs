//! Model spaces embedded in an ambient vector space.
//!
//! Points and tangent vectors are ambient coordinate slices. The sphere
//! `S^{n-1}` lives in `R^n`; hyperbolic space `H^d` is the upper sheet of the
//! hyperboloid `<x,x>_M = -1` in `R^{d+1}` with the Minkowski form
//! `<x,y>_M = -x0 y0 + sum_i xi yi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by the geometry code.
pub mod tol {
    /// Residual allowed in the point constraint.
    pub const POINT: f64 = 1e-9;
    /// Residual allowed in the tangency constraint.
    pub const TANGENT: f64 = 1e-8;
    /// Orthonormality residual allowed for frames.
    pub const FRAME: f64 = 1e-8;
    /// `<x,y> <= -1 + ANTIPODAL` counts as antipodal on the sphere.
    pub const ANTIPODAL: f64 = 1e-12;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Manifold {
    Euclidean { dim: usize },
    /// Unit sphere in `R^{ambient_dim}`.
    Sphere { ambient_dim: usize },
    /// Hyperbolic space of intrinsic dimension `dim`, embedded in `R^{dim+1}`.
    Hyperboloid { dim: usize },
}

/// Curvature constants: operator norm bound on `R`, bound on its covariant
/// derivative, and the constant `L_Ric` with `-Ric(u,u) <= L_Ric |u|^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub l_r: f64,
    pub l_r_prime: f64,
    pub l_ric: f64,
}

/// Orthonormal frame of a tangent space, stored as `d` ambient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    n: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Self {
        let n = vectors.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * vectors.len());
        for v in vectors {
            assert_eq!(v.len(), n, "frame vectors must share a length");
            data.extend_from_slice(v);
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n.max(1))
    }

    /// `sum_i xi[i] E_i`.
    pub fn combine(&self, xi: &[f64]) -> Vec<f64> {
        assert_eq!(xi.len(), self.len(), "coefficient count must match frame size");
        let mut out = vec![0.0; self.n];
        for (c, e) in xi.iter().zip(self.vectors()) {
            axpy(*c, e, &mut out);
        }
        out
    }
}

/// Result of a logarithm: the initial velocity of the chosen geodesic and
/// whether that choice was arbitrary (cut locus).
#[derive(Clone, Debug, PartialEq)]
pub struct Log {
    pub v: Vec<f64>,
    pub nonunique: bool,
}

/// Geodesic from `x` with unit direction `e`, reaching its endpoint at
/// parameter `theta`.
#[derive(Clone, Debug)]
pub struct Geodesic {
    manifold: Manifold,
    x: Vec<f64>,
    e: Vec<f64>,
    theta: f64,
    nonunique: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub(crate) fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    -a[0] * b[0] + dot(&a[1..], &b[1..])
}

pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

pub(crate) fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Self {
        Manifold::Euclidean { dim }
    }

    pub fn sphere(ambient_dim: usize) -> Self {
        Manifold::Sphere { ambient_dim }
    }

    pub fn hyperboloid(dim: usize) -> Self {
        Manifold::Hyperboloid { dim }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Manifold::Euclidean { .. } => "euclidean",
            Manifold::Sphere { .. } => "sphere",
            Manifold::Hyperboloid { .. } => "hyperboloid",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Sphere { ambient_dim } => ambient_dim,
            Manifold::Hyperboloid { dim } => dim + 1,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Sphere { ambient_dim } => ambient_dim.saturating_sub(1),
            Manifold::Hyperboloid { dim } => dim,
        }
    }

    pub fn curvature_bounds(&self) -> CurvatureBounds {
        let d = self.intrinsic_dim() as f64;
        match self {
            Manifold::Euclidean { .. } => CurvatureBounds { l_r: 0.0, l_r_prime: 0.0, l_ric: 0.0 },
            Manifold::Sphere { .. } => CurvatureBounds { l_r: 1.0, l_r_prime: 0.0, l_ric: -(d - 1.0) },
            Manifold::Hyperboloid { .. } => CurvatureBounds { l_r: 1.0, l_r_prime: 0.0, l_ric: d - 1.0 },
        }
    }

    /// Canonical point: the origin, or the first basis vector.
    pub fn base_point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient_dim()];
        if !matches!(self, Manifold::Euclidean { .. }) {
            x[0] = 1.0;
        }
        x
    }

    /// Metric on tangent vectors (Minkowski form for the hyperboloid).
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Manifold::Hyperboloid { .. } => minkowski(u, v),
            _ => dot(u, v),
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch { expected: self.ambient_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Residual of the point constraint.
    pub fn point_residual(&self, x: &[f64]) -> f64 {
        match self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { .. } => (dot(x, x).sqrt() - 1.0).abs(),
            Manifold::Hyperboloid { .. } => {
                let r = (minkowski(x, x) + 1.0).abs() / x[0].abs().max(1.0).powi(2);
                if x[0] > 0.0 {
                    r
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        self.check_len(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint { residual: f64::NAN });
        }
        let residual = self.point_residual(x);
        if residual > tol::POINT {
            return Err(Error::InvalidPoint { residual });
        }
        Ok(())
    }

    /// Residual of the tangency constraint, relative to `max(1, |v|)`.
    pub fn tangent_residual(&self, x: &[f64], v: &[f64]) -> f64 {
        let scale = dot(v, v).sqrt().max(1.0);
        match self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { .. } => dot(x, v).abs() / scale,
            Manifold::Hyperboloid { .. } => minkowski(x, v).abs() / (scale * x[0].abs().max(1.0)),
        }
    }

    pub fn check_tangent(&self, x: &[f64], v: &[f64]) -> Result<()> {
        self.check_len(x)?;
        self.check_len(v)?;
        let residual = self.tangent_residual(x, v);
        if residual > tol::TANGENT {
            return Err(Error::InvalidTangent { residual });
        }
        Ok(())
    }

    /// Nearest point on the manifold (radial for the sphere, lifting `x0`
    /// for the hyperboloid).
    pub fn project_point(&self, x: &mut [f64]) {
        match self {
            Manifold::Euclidean { .. } => {}
            Manifold::Sphere { .. } => {
                let n = dot(x, x).sqrt();
                if n > 0.0 {
                    x.iter_mut().for_each(|v| *v /= n);
                }
            }
            Manifold::Hyperboloid { .. } => {
                x[0] = (1.0 + dot(&x[1..], &x[1..])).sqrt();
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto `T_x M`.
    pub fn project_tangent(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = v.to_vec();
        self.project_tangent_in_place(x, &mut out);
        out
    }

    pub fn project_tangent_in_place(&self, x: &[f64], v: &mut [f64]) {
        match self {
            Manifold::Euclidean { .. } => {}
            Manifold::Sphere { .. } => {
                let c = dot(x, v);
                axpy(-c, x, v);
            }
            Manifold::Hyperboloid { .. } => {
                let c = minkowski(v, x);
                axpy(c, x, v);
            }
        }
    }

    pub fn exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            Manifold::Euclidean { .. } => x.iter().zip(v).map(|(a, b)| a + b).collect(),
            Manifold::Sphere { .. } => {
                let t = dot(v, v).sqrt();
                if t == 0.0 {
                    return x.to_vec();
                }
                let (s, c) = t.sin_cos();
                let mut y: Vec<f64> = x.iter().zip(v).map(|(a, b)| c * a + (s / t) * b).collect();
                self.project_point(&mut y);
                y
            }
            Manifold::Hyperboloid { .. } => {
                let t = minkowski(v, v).max(0.0).sqrt();
                if t == 0.0 {
                    return x.to_vec();
                }
                let (s, c) = (t.sinh(), t.cosh());
                let mut y: Vec<f64> = x.iter().zip(v).map(|(a, b)| c * a + (s / t) * b).collect();
                self.project_point(&mut y);
                y
            }
        }
    }

    /// Minimizing geodesic from `x` to `y`; on the cut locus a deterministic
    /// direction is chosen and flagged.
    pub fn geodesic(&self, x: &[f64], y: &[f64]) -> Geodesic {
        let n = x.len();
        if x == y {
            return Geodesic { manifold: *self, x: x.to_vec(), e: vec![0.0; n], theta: 0.0, nonunique: false };
        }
        let (e, theta, nonunique) = match self {
            Manifold::Euclidean { .. } => {
                let u = sub(y, x);
                let t = dot(&u, &u).sqrt();
                let e = if t > 0.0 { scaled(1.0 / t, &u) } else { vec![0.0; n] };
                (e, t, false)
            }
            Manifold::Sphere { .. } => {
                let ip = dot(x, y);
                let mut u = y.to_vec();
                axpy(-ip, x, &mut u);
                let nu = dot(&u, &u).sqrt();
                let theta = nu.atan2(ip);
                if ip <= -1.0 + tol::ANTIPODAL {
                    let frame = self.gram_schmidt_frame(x);
                    (frame.vector(0).to_vec(), theta, true)
                } else if nu > 0.0 {
                    (scaled(1.0 / nu, &u), theta, false)
                } else {
                    (vec![0.0; n], 0.0, false)
                }
            }
            Manifold::Hyperboloid { .. } => {
                let alpha = -minkowski(x, y);
                let mut u = y.to_vec();
                axpy(-alpha, x, &mut u);
                self.project_tangent_in_place(x, &mut u);
                let nu = minkowski(&u, &u).max(0.0).sqrt();
                if nu > 0.0 {
                    (scaled(1.0 / nu, &u), nu.asinh(), false)
                } else {
                    (vec![0.0; n], 0.0, false)
                }
            }
        };
        Geodesic { manifold: *self, x: x.to_vec(), e, theta, nonunique }
    }

    /// Geodesic `s -> Exp_x(s v)`, `s` in `[0,1]`, whether or not it
    /// minimizes.
    pub fn geodesic_from(&self, x: &[f64], v: &[f64]) -> Geodesic {
        let theta = self.norm(v);
        let e = if theta > 0.0 { scaled(1.0 / theta, v) } else { vec![0.0; x.len()] };
        Geodesic { manifold: *self, x: x.to_vec(), e, theta, nonunique: false }
    }

    pub fn log(&self, x: &[f64], y: &[f64]) -> Log {
        let g = self.geodesic(x, y);
        Log { v: g.velocity(), nonunique: g.nonunique }
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        if x == y {
            return 0.0;
        }
        match self {
            Manifold::Euclidean { .. } => {
                let u = sub(y, x);
                dot(&u, &u).sqrt()
            }
            Manifold::Sphere { .. } => {
                let ip = dot(x, y);
                let mut u = y.to_vec();
                axpy(-ip, x, &mut u);
                dot(&u, &u).sqrt().atan2(ip)
            }
            Manifold::Hyperboloid { .. } => self.geodesic(x, y).length(),
        }
    }

    /// Parallel transport of `v` from `x` to `y` along the minimizing geodesic.
    pub fn transport(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        self.geodesic(x, y).transport(v)
    }

    pub fn transport_frame(&self, frame: &Frame, x: &[f64], y: &[f64]) -> Frame {
        self.geodesic(x, y).transport_frame(frame)
    }

    /// `R(u,v)w` at `x`, with the sign convention where the sphere has
    /// `<R(u,v)v,u> = |u|^2|v|^2 - <u,v>^2`.
    pub fn curvature_op(&self, _x: &[f64], u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let sign = match self {
            Manifold::Euclidean { .. } => return vec![0.0; u.len()],
            Manifold::Sphere { .. } => 1.0,
            Manifold::Hyperboloid { .. } => -1.0,
        };
        let a = self.inner(v, w);
        let b = self.inner(u, w);
        u.iter().zip(v).map(|(ui, vi)| sign * (a * ui - b * vi)).collect()
    }

    /// `Ric(u,u)`.
    pub fn ricci(&self, _x: &[f64], u: &[f64]) -> f64 {
        let d = self.intrinsic_dim() as f64;
        let uu = self.inner(u, u);
        match self {
            Manifold::Euclidean { .. } => 0.0,
            Manifold::Sphere { .. } => (d - 1.0) * uu,
            Manifold::Hyperboloid { .. } => -(d - 1.0) * uu,
        }
    }

    /// Orthonormal frame of `T_x M` from the projected ambient basis.
    ///
    /// Pivoted: at each stage the candidate with the largest residual is
    /// taken (lowest index on ties), and each candidate is orthogonalised
    /// twice. At the sphere point `e_1` this returns `e_2, ..., e_n`.
    pub fn gram_schmidt_frame(&self, x: &[f64]) -> Frame {
        let n = self.ambient_dim();
        let d = self.intrinsic_dim();
        let mut cands: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.project_tangent(x, &e)
            })
            .collect();
        let mut used = vec![false; n];
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
        for _ in 0..d {
            let mut best = usize::MAX;
            let mut best_norm = -1.0;
            for (j, c) in cands.iter().enumerate() {
                if used[j] {
                    continue;
                }
                let nj = self.norm(c);
                if nj > best_norm * (1.0 + 1e-12) {
                    best = j;
                    best_norm = nj;
                }
            }
            used[best] = true;
            let mut e = std::mem::take(&mut cands[best]);
            for _ in 0..2 {
                for q in &out {
                    let c = self.inner(&e, q);
                    axpy(-c, q, &mut e);
                }
            }
            let ne = self.norm(&e);
            e.iter_mut().for_each(|v| *v /= ne);
            for (j, c) in cands.iter_mut().enumerate() {
                if !used[j] {
                    let ip = self.inner(c, &e);
                    axpy(-ip, &e, c);
                }
            }
            out.push(e);
        }
        Frame::from_vectors(&out)
    }

    /// Coordinates of a tangent vector in an orthonormal frame.
    pub fn frame_coords(&self, frame: &Frame, v: &[f64]) -> Vec<f64> {
        frame.vectors().map(|e| self.inner(e, v)).collect()
    }

    /// Largest deviation of the frame's Gram matrix from the identity.
    pub fn frame_residual(&self, frame: &Frame) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in frame.vectors().enumerate() {
            for (j, b) in frame.vectors().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.inner(a, b) - target).abs());
            }
        }
        worst
    }
}

impl Geodesic {
    pub fn length(&self) -> f64 {
        self.theta
    }

    pub fn nonunique(&self) -> bool {
        self.nonunique
    }

    pub fn start(&self) -> &[f64] {
        &self.x
    }

    /// Unit initial direction (zero for a constant geodesic).
    pub fn direction(&self) -> &[f64] {
        &self.e
    }

    /// `gamma'(0)`, i.e. the logarithm of the endpoint.
    pub fn velocity(&self) -> Vec<f64> {
        scaled(self.theta, &self.e)
    }

    /// `gamma(s)` for `s` in `[0,1]`.
    pub fn point_at(&self, s: f64) -> Vec<f64> {
        self.manifold.exp(&self.x, &scaled(s * self.theta, &self.e))
    }

    /// `gamma'(s)`, transported velocity at `gamma(s)`.
    pub fn velocity_at(&self, s: f64) -> Vec<f64> {
        scaled(self.theta, &self.transport_partial(s, &self.e))
    }

    pub fn transport(&self, v: &[f64]) -> Vec<f64> {
        self.transport_partial(1.0, v)
    }

    /// Transport of `v` from `gamma(0)` to `gamma(s)`.
    pub fn transport_partial(&self, s: f64, v: &[f64]) -> Vec<f64> {
        let t = s * self.theta;
        if t == 0.0 {
            return v.to_vec();
        }
        let m = self.manifold;
        let mut out = v.to_vec();
        match m {
            Manifold::Euclidean { .. } => return out,
            Manifold::Sphere { .. } => {
                let c = dot(v, &self.e);
                let (st, ct) = t.sin_cos();
                axpy(c * (ct - 1.0), &self.e, &mut out);
                axpy(-c * st, &self.x, &mut out);
            }
            Manifold::Hyperboloid { .. } => {
                let c = minkowski(v, &self.e);
                axpy(c * (t.cosh() - 1.0), &self.e, &mut out);
                axpy(c * t.sinh(), &self.x, &mut out);
            }
        }
        let y = self.point_at(s);
        m.project_tangent_in_place(&y, &mut out);
        out
    }

    pub fn transport_frame(&self, frame: &Frame) -> Frame {
        if self.theta == 0.0 {
            return frame.clone();
        }
        let vs: Vec<Vec<f64>> = frame.vectors().map(|e| self.transport(e)).collect();
        Frame::from_vectors(&vs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sphere_exp_quarter_turn() {
        let m = Manifold::sphere(3);
        let y = m.exp(&[1.0, 0.0, 0.0], &[0.0, std::f64::consts::FRAC_PI_2, 0.0]);
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_log_antipodal_is_flagged_and_deterministic() {
        let m = Manifold::sphere(3);
        let a = m.log(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]);
        let b = m.log(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0]);
        assert!(a.nonunique);
        assert_eq!(a.v, b.v);
        assert_abs_diff_eq!(m.norm(&a.v), std::f64::consts::PI, epsilon = 1e-12);
        assert_eq!(m.gram_schmidt_frame(&[1.0, 0.0, 0.0]).vector(0), &a.v.iter().map(|v| v / std::f64::consts::PI).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn hyperboloid_distance_from_origin() {
        let m = Manifold::hyperboloid(2);
        let y = [2f64.cosh(), 2f64.sinh(), 0.0];
        assert_abs_diff_eq!(m.dist(&m.base_point(), &y), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sphere_transport_is_rotation_about_normal() {
        // Transport along the equator from e1 to e2 of e3 fixes e3 and sends e2 to -e1.
        let m = Manifold::sphere(3);
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let p3 = m.transport(&x, &y, &[0.0, 0.0, 1.0]);
        let p2 = m.transport(&x, &y, &[0.0, 1.0, 0.0]);
        assert_abs_diff_eq!(p3[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p2[0], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_transport_matches_reflection_formula() {
        let m = Manifold::sphere(4);
        let mut x = vec![0.3, -0.5, 0.7, 0.2];
        let mut y = vec![-0.1, 0.4, 0.6, -0.6];
        m.project_point(&mut x);
        m.project_point(&mut y);
        let v = m.project_tangent(&x, &[0.2, 1.0, -0.4, 0.9]);
        let p = m.transport(&x, &y, &v);
        let c = dot(&y, &v) / (1.0 + dot(&x, &y));
        for i in 0..4 {
            assert_abs_diff_eq!(p[i], v[i] - c * (x[i] + y[i]), epsilon = 1e-13);
        }
    }

    #[test]
    fn frame_at_north_pole_is_remaining_basis() {
        let m = Manifold::sphere(4);
        let f = m.gram_schmidt_frame(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.len(), 3);
        for i in 0..3 {
            let mut e = [0.0; 4];
            e[i + 1] = 1.0;
            assert_eq!(f.vector(i), &e[..]);
        }
    }

    #[test]
    fn frame_on_hyperboloid_is_orthonormal() {
        let m = Manifold::hyperboloid(3);
        let x = m.exp(&m.base_point(), &[0.0, 1.5, -0.7, 2.0]);
        let f = m.gram_schmidt_frame(&x);
        assert!(m.frame_residual(&f) < tol::FRAME);
        for e in f.vectors() {
            assert!(m.tangent_residual(&x, e) < tol::TANGENT);
        }
    }

    #[test]
    fn euclidean_ops_are_flat() {
        let m = Manifold::euclidean(3);
        assert_eq!(m.exp(&[1.0, 2.0, 3.0], &[0.5, 0.0, -1.0]), vec![1.5, 2.0, 2.0]);
        assert_eq!(m.transport(&[0.0; 3], &[1.0, 1.0, 1.0], &[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(m.curvature_op(&[0.0; 3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), vec![0.0; 3]);
    }

    #[test]
    fn ricci_values() {
        let s = Manifold::sphere(4);
        let h = Manifold::hyperboloid(3);
        assert_abs_diff_eq!(s.ricci(&s.base_point(), &[0.0, 1.0, 1.0, 0.0]), 4.0);
        assert_abs_diff_eq!(h.ricci(&h.base_point(), &[0.0, 1.0, 1.0, 0.0]), -4.0);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let s = Manifold::sphere(3);
        assert!(matches!(s.check_point(&[1.0, 1.0, 0.0]), Err(Error::InvalidPoint { .. })));
        assert!(matches!(s.check_point(&[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(s.check_tangent(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), Err(Error::InvalidTangent { .. })));
        let h = Manifold::hyperboloid(2);
        assert!(h.check_point(&[-1.0, 0.0, 0.0]).is_err());
    }
}
