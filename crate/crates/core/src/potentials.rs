//! Target potentials `h` with `pi ~ exp(-h)` and drift `beta = -grad h / 2`.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::manifolds::{dot, scaled, sub, Manifold};
use crate::noise::{keyed_rng, standard_normal_vec, Stream};

pub trait Potential: Send + Sync {
    fn manifold(&self) -> Manifold;

    fn value(&self, x: &[f64]) -> f64;

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64>;

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        scaled(-0.5, &self.riemannian_grad(x))
    }

    /// Declared Lipschitz constant of the drift under parallel transport.
    fn lipschitz_drift(&self) -> f64;

    /// A minimiser of `h`, when known in closed form.
    fn stationary_point(&self) -> Option<Vec<f64>>;

    fn label(&self) -> String;
}

/// `h(x) = c/2 |x - mean|^2` on flat space.
#[derive(Clone, Debug)]
pub struct GaussianQuadratic {
    pub c: f64,
    pub mean: Vec<f64>,
}

impl Potential for GaussianQuadratic {
    fn manifold(&self) -> Manifold {
        Manifold::euclidean(self.mean.len())
    }

    fn value(&self, x: &[f64]) -> f64 {
        let u = sub(x, &self.mean);
        0.5 * self.c * dot(&u, &u)
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        scaled(self.c, &sub(x, &self.mean))
    }

    fn lipschitz_drift(&self) -> f64 {
        0.5 * self.c
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        Some(self.mean.clone())
    }

    fn label(&self) -> String {
        format!("gaussian(c={})", self.c)
    }
}

/// Von Mises-Fisher target `h(x) = -kappa <x, mu>` on the sphere.
#[derive(Clone, Debug)]
pub struct VonMisesFisher {
    pub kappa: f64,
    pub mu: Vec<f64>,
}

impl VonMisesFisher {
    pub fn new(kappa: f64, mu: Vec<f64>) -> Result<Self> {
        let n = dot(&mu, &mu).sqrt();
        if !(kappa >= 0.0) || n == 0.0 {
            return Err(invalid("vMF needs kappa >= 0 and a nonzero mean direction"));
        }
        Ok(Self { kappa, mu: scaled(1.0 / n, &mu) })
    }
}

impl Potential for VonMisesFisher {
    fn manifold(&self) -> Manifold {
        Manifold::sphere(self.mu.len())
    }

    fn value(&self, x: &[f64]) -> f64 {
        -self.kappa * dot(x, &self.mu)
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        let c = dot(x, &self.mu);
        self.mu.iter().zip(x).map(|(m, xi)| -self.kappa * (m - c * xi)).collect()
    }

    fn lipschitz_drift(&self) -> f64 {
        // Bound on |grad U| plus |Hess U| for U = kappa <x,mu> / 2.
        self.kappa
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        Some(self.mu.clone())
    }

    fn label(&self) -> String {
        format!("vmf(kappa={})", self.kappa)
    }
}

/// `h(x) = -log sum_j w_j exp(kappa_j <x, mu_j>)`.
#[derive(Clone, Debug)]
pub struct VmfMixture {
    pub components: Vec<(f64, VonMisesFisher)>,
}

impl VmfMixture {
    fn responsibilities(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let logits: Vec<f64> =
            self.components.iter().map(|(w, c)| w.ln() + c.kappa * dot(x, &c.mu)).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        (top + total.ln(), weights.into_iter().map(|w| w / total).collect())
    }
}

impl Potential for VmfMixture {
    fn manifold(&self) -> Manifold {
        self.components[0].1.manifold()
    }

    fn value(&self, x: &[f64]) -> f64 {
        -self.responsibilities(x).0
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        let (_, p) = self.responsibilities(x);
        let mut g = vec![0.0; x.len()];
        for (pj, (_, c)) in p.iter().zip(&self.components) {
            for (gi, mi) in g.iter_mut().zip(&c.mu) {
                *gi -= pj * c.kappa * mi;
            }
        }
        self.manifold().project_tangent(x, &g)
    }

    fn lipschitz_drift(&self) -> f64 {
        let k = self.components.iter().map(|(_, c)| c.kappa).fold(0.0, f64::max);
        0.5 * (k + k * k)
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        None
    }

    fn label(&self) -> String {
        format!("vmf-mixture({})", self.components.len())
    }
}

/// `h(x) = c/2 d(x, center)^2` on the hyperboloid.
///
/// The drift is only Lipschitz on bounded sets; the declared constant is
/// `c/2 * rho coth rho` for the working radius `rho`.
#[derive(Clone, Debug)]
pub struct HyperboloidQuadratic {
    pub c: f64,
    pub center: Vec<f64>,
    pub working_radius: f64,
}

impl Potential for HyperboloidQuadratic {
    fn manifold(&self) -> Manifold {
        Manifold::hyperboloid(self.center.len() - 1)
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.c * self.manifold().dist(x, &self.center).powi(2)
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        scaled(-self.c, &self.manifold().log(x, &self.center).v)
    }

    fn lipschitz_drift(&self) -> f64 {
        let r = self.working_radius;
        let zeta = if r > 1e-8 { r / r.tanh() } else { 1.0 };
        0.5 * self.c * zeta
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        Some(self.center.clone())
    }

    fn label(&self) -> String {
        format!("hyperbolic-quadratic(c={})", self.c)
    }
}

/// `h = 0`: the uniform measure (compact case) or pure Brownian motion.
#[derive(Clone, Debug)]
pub struct ZeroPotential {
    pub manifold: Manifold,
}

impl Potential for ZeroPotential {
    fn manifold(&self) -> Manifold {
        self.manifold
    }

    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }

    fn lipschitz_drift(&self) -> f64 {
        0.0
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        None
    }

    fn label(&self) -> String {
        "zero".into()
    }
}

/// `h = (1/N) sum_i h_i`.
#[derive(Clone)]
pub struct FiniteSum {
    pub components: Vec<Arc<dyn Potential>>,
}

impl Potential for FiniteSum {
    fn manifold(&self) -> Manifold {
        self.components[0].manifold()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum::<f64>() / self.components.len() as f64
    }

    fn riemannian_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for c in &self.components {
            for (gi, ci) in g.iter_mut().zip(c.riemannian_grad(x)) {
                *gi += ci;
            }
        }
        scaled(1.0 / self.components.len() as f64, &g)
    }

    fn lipschitz_drift(&self) -> f64 {
        self.components.iter().map(|c| c.lipschitz_drift()).fold(0.0, f64::max)
    }

    fn stationary_point(&self) -> Option<Vec<f64>> {
        None
    }

    fn label(&self) -> String {
        format!("finite-sum({})", self.components.len())
    }
}

/// Unbiased drift estimates from one uniformly drawn component.
#[derive(Clone)]
pub struct StochasticGradOracle {
    pub sum: FiniteSum,
    /// Declared bound on `|beta_i(x) - beta(x)|`.
    pub sigma: f64,
}

impl StochasticGradOracle {
    pub fn new(components: Vec<Arc<dyn Potential>>, sigma: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("stochastic gradient oracle needs at least one component"));
        }
        let m = components[0].manifold();
        if components.iter().any(|c| c.manifold() != m) {
            return Err(invalid("components live on different manifolds"));
        }
        Ok(Self { sum: FiniteSum { components }, sigma })
    }

    /// Gaussian components `c/2 |x - a_i|^2`; sigma is computed exactly.
    pub fn gaussian_anchors(c: f64, anchors: &[Vec<f64>]) -> Result<Self> {
        let dim = anchors.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; dim];
        for a in anchors {
            for (m, ai) in mean.iter_mut().zip(a) {
                *m += ai / anchors.len() as f64;
            }
        }
        let sigma = anchors
            .iter()
            .map(|a| 0.5 * c * dot(&sub(a, &mean), &sub(a, &mean)).sqrt())
            .fold(0.0, f64::max);
        let comps: Vec<Arc<dyn Potential>> = anchors
            .iter()
            .map(|a| Arc::new(GaussianQuadratic { c, mean: a.clone() }) as Arc<dyn Potential>)
            .collect();
        Self::new(comps, sigma)
    }

    pub fn len(&self) -> usize {
        self.sum.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.components.is_empty()
    }

    pub fn component_drift(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.sum.components[i].drift(x)
    }

    pub fn sample_drift<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        let i = rng.random_range(0..self.len());
        self.component_drift(i, x)
    }

    /// Largest component deviation `|beta_i(x) - beta(x)|` at `x`.
    pub fn deviation_at(&self, x: &[f64]) -> f64 {
        let b = self.sum.drift(x);
        (0..self.len())
            .map(|i| {
                let u = sub(&self.component_drift(i, x), &b);
                self.sum.manifold().norm(&u)
            })
            .fold(0.0, f64::max)
    }
}

/// Region from which point pairs are drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// Uniform on the sphere; elsewhere a ball of radius 3 around the base point.
    Default,
    /// Geodesic ball (uniform radius profile) around a center.
    Ball { center: Vec<f64>, radius: f64 },
}

/// Point drawn from `region`: a random direction at the center and radius
/// `radius * U^(1/d)`.
pub fn sample_region<R: Rng + ?Sized>(m: &Manifold, region: &Region, rng: &mut R) -> Vec<f64> {
    let (center, radius) = match region {
        Region::Default => match m {
            Manifold::Sphere { .. } => {
                let mut x = standard_normal_vec(rng, m.ambient_dim());
                m.project_point(&mut x);
                return x;
            }
            _ => (m.base_point(), 3.0),
        },
        Region::Ball { center, radius } => (center.clone(), *radius),
    };
    let d = m.intrinsic_dim();
    let frame = m.gram_schmidt_frame(&center);
    let mut xi = standard_normal_vec(rng, d);
    let n = dot(&xi, &xi).sqrt();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / d as f64);
    xi.iter_mut().for_each(|v| *v *= r / n);
    m.exp(&center, &frame.combine(&xi))
}

/// `<P_{y->x} beta(y) - beta(x), log_x y> / d(x,y)^2`.
pub fn dissipativity_ratio(p: &dyn Potential, x: &[f64], y: &[f64]) -> f64 {
    let m = p.manifold();
    let g = m.geodesic(x, y);
    let d = g.length();
    let by = m.transport(y, x, &p.drift(y));
    let diff = sub(&by, &p.drift(x));
    m.inner(&diff, &g.velocity()) / (d * d)
}

/// Dissipativity constants: `rho <= q` always and `rho <= -m` once
/// `d(x,y) >= r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipativityParams {
    pub m: f64,
    pub q: f64,
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipativityEstimate {
    pub q_hat: f64,
    pub pairs: usize,
    /// Tightest `(m, q, R)` with `m > 0`, when one exists.
    pub params: Option<DissipativityParams>,
}

/// Empirical dissipativity constants from random pairs in `region`.
///
/// `m_hat(R) = -max rho` over pairs at distance at least `R`; the reported
/// radius is the smallest one (0 or a pair distance) with `m_hat > 0`. On
/// the sphere, when no such radius is found, every `m` is admissible at
/// `R = pi` and `m` is reported as infinite.
pub fn estimate_dissipativity(p: &dyn Potential, n_pairs: usize, region: &Region, seed: u64) -> DissipativityEstimate {
    let m = p.manifold();
    let mut rng = keyed_rng(seed, Stream::Pairs, 0, 0);
    let mut samples: Vec<(f64, f64)> = Vec::with_capacity(n_pairs);
    while samples.len() < n_pairs {
        let x = sample_region(&m, region, &mut rng);
        let y = sample_region(&m, region, &mut rng);
        let d = m.dist(&x, &y);
        if d < 1e-9 || m.geodesic(&x, &y).nonunique() {
            continue;
        }
        samples.push((d, dissipativity_ratio(p, &x, &y)));
    }
    let q_hat = samples.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut running = f64::NEG_INFINITY;
    let mut best: Option<DissipativityParams> = None;
    for &(d, rho) in &samples {
        running = running.max(rho);
        if running >= 0.0 {
            break;
        }
        best = Some(DissipativityParams { m: -running, q: q_hat, r: d });
    }
    if let Some(b) = best.as_mut() {
        if b.m == -q_hat {
            b.r = 0.0;
        }
    }
    if best.is_none() && matches!(m, Manifold::Sphere { .. }) {
        best = Some(DissipativityParams { m: f64::INFINITY, q: q_hat, r: std::f64::consts::PI });
    }
    DissipativityEstimate { q_hat, pairs: samples.len(), params: best }
}

/// Largest `|P_{y->x} beta(y) - beta(x)| / d(x,y)` over close random pairs.
pub fn check_lipschitz(p: &dyn Potential, n_probes: usize, region: &Region, seed: u64) -> f64 {
    let m = p.manifold();
    let mut rng = keyed_rng(seed, Stream::Probe, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n_probes {
        let x = sample_region(&m, region, &mut rng);
        let frame = m.gram_schmidt_frame(&x);
        let mut xi = standard_normal_vec(&mut rng, m.intrinsic_dim());
        let n = dot(&xi, &xi).sqrt();
        let u: f64 = rng.random();
        let r = 1e-3 * 100f64.powf(u);
        xi.iter_mut().for_each(|v| *v *= r / n);
        let y = m.exp(&x, &frame.combine(&xi));
        let d = m.dist(&x, &y);
        let diff = sub(&m.transport(&y, &x, &p.drift(&y)), &p.drift(&x));
        worst = worst.max(m.norm(&diff) / d);
    }
    worst
}

/// Serializable description of a target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Gaussian { c: f64, mean: Vec<f64> },
    Vmf { kappa: f64, mu: Vec<f64> },
    VmfMixture { weights: Vec<f64>, kappas: Vec<f64>, mus: Vec<Vec<f64>> },
    HyperbolicQuadratic { c: f64, center: Vec<f64>, #[serde(default = "default_radius")] working_radius: f64 },
    Zero { manifold: Manifold },
}

fn default_radius() -> f64 {
    3.0
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Arc<dyn Potential>> {
        Ok(match self {
            PotentialSpec::Gaussian { c, mean } => Arc::new(GaussianQuadratic { c: *c, mean: mean.clone() }),
            PotentialSpec::Vmf { kappa, mu } => Arc::new(VonMisesFisher::new(*kappa, mu.clone())?),
            PotentialSpec::VmfMixture { weights, kappas, mus } => {
                if weights.len() != kappas.len() || weights.len() != mus.len() || weights.is_empty() {
                    return Err(invalid("mixture weights, kappas and mus must have equal nonzero length"));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(invalid("mixture weights must be positive"));
                }
                let components = weights
                    .iter()
                    .zip(kappas)
                    .zip(mus)
                    .map(|((w, k), mu)| Ok((*w, VonMisesFisher::new(*k, mu.clone())?)))
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(VmfMixture { components })
            }
            PotentialSpec::HyperbolicQuadratic { c, center, working_radius } => {
                let m = Manifold::hyperboloid(center.len().saturating_sub(1));
                m.check_point(center)?;
                Arc::new(HyperboloidQuadratic { c: *c, center: center.clone(), working_radius: *working_radius })
            }
            PotentialSpec::Zero { manifold } => Arc::new(ZeroPotential { manifold: *manifold }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(p: &dyn Potential, x: &[f64]) -> Vec<f64> {
        // Central differences along the geodesics through a frame.
        let m = p.manifold();
        let frame = m.gram_schmidt_frame(x);
        let h = 1e-5;
        let mut g = vec![0.0; x.len()];
        for e in frame.vectors() {
            let plus = p.value(&m.exp(x, &scaled(h, e)));
            let minus = p.value(&m.exp(x, &scaled(-h, e)));
            let c = (plus - minus) / (2.0 * h);
            for (gi, ei) in g.iter_mut().zip(e) {
                *gi += c * ei;
            }
        }
        g
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let vmf = VonMisesFisher::new(3.0, vec![0.0, 0.6, 0.8]).unwrap();
        let mut x = vec![0.5, -0.2, 0.7];
        Manifold::sphere(3).project_point(&mut x);
        assert_close(&vmf.riemannian_grad(&x), &fd_grad(&vmf, &x), 1e-7);

        let mix = PotentialSpec::VmfMixture {
            weights: vec![0.3, 0.7],
            kappas: vec![2.0, 5.0],
            mus: vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
        }
        .build()
        .unwrap();
        assert_close(&mix.riemannian_grad(&x), &fd_grad(mix.as_ref(), &x), 1e-7);

        let h = Manifold::hyperboloid(2);
        let center = h.exp(&h.base_point(), &[0.0, 0.3, -0.4]);
        let hq = HyperboloidQuadratic { c: 2.0, center, working_radius: 3.0 };
        let y = h.exp(&h.base_point(), &[0.0, -0.8, 0.5]);
        assert_close(&hq.riemannian_grad(&y), &fd_grad(&hq, &y), 1e-7);
    }

    #[test]
    fn gaussian_dissipativity_constants() {
        let p = GaussianQuadratic { c: 1.0, mean: vec![0.0; 3] };
        let est = estimate_dissipativity(&p, 500, &Region::Default, 1);
        let params = est.params.unwrap();
        assert!((params.m - 0.5).abs() < 0.02);
        assert!((est.q_hat + 0.5).abs() < 0.02);
        assert!(params.r.abs() < 0.02);
    }

    #[test]
    fn sphere_vmf_admits_any_m_at_pi() {
        let p = VonMisesFisher::new(1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let est = estimate_dissipativity(&p, 2000, &Region::Default, 2);
        let params = est.params.unwrap();
        assert!(params.r <= std::f64::consts::PI);
        assert!(est.q_hat <= p.lipschitz_drift() + 1e-9);
    }

    #[test]
    fn lipschitz_estimates_stay_below_declared() {
        let p = VonMisesFisher::new(4.0, vec![1.0, 0.0, 0.0]).unwrap();
        let est = check_lipschitz(&p, 2000, &Region::Default, 3);
        assert!(est <= p.lipschitz_drift());
        assert!((est - 2.0).abs() < 0.05, "vMF drift Lipschitz constant is kappa/2, got {est}");
        let z = ZeroPotential { manifold: Manifold::sphere(3) };
        assert_eq!(check_lipschitz(&z, 10, &Region::Default, 3), 0.0);
    }

    #[test]
    fn oracle_sigma_bounds_deviation() {
        let anchors = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 2.0], vec![0.0, -2.0]];
        let o = StochasticGradOracle::gaussian_anchors(1.0, &anchors).unwrap();
        assert!((o.sigma - 1.0).abs() < 1e-15);
        assert!((o.deviation_at(&[0.3, -0.2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_mixture_spec_is_rejected() {
        let spec = PotentialSpec::VmfMixture { weights: vec![1.0], kappas: vec![1.0, 2.0], mus: vec![vec![1.0, 0.0, 0.0]] };
        assert!(spec.build().is_err());
    }
}
