//! Exact samplers for reference distributions.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{invalid, Result};
use crate::manifolds::{axpy, dot, Manifold};
use crate::noise::standard_normal_vec;

/// Draw from the von Mises-Fisher law `exp(kappa <x,mu>)` on the unit
/// sphere of `R^p` by Wood's rejection scheme.
pub fn sample_vmf<R: Rng + ?Sized>(kappa: f64, mu: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let p = mu.len();
    if p < 2 || !(kappa >= 0.0) {
        return Err(invalid("vMF sampling needs dimension >= 2 and kappa >= 0"));
    }
    let m = Manifold::sphere(p);
    let pm1 = (p - 1) as f64;
    let w = if kappa == 0.0 {
        2.0 * rng.random::<f64>() - 1.0
    } else {
        let b = pm1 / (2.0 * kappa + (4.0 * kappa * kappa + pm1 * pm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + pm1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(pm1 / 2.0, pm1 / 2.0).map_err(|e| invalid(e.to_string()))?;
        loop {
            let z = beta.sample(rng);
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = rng.random();
            if kappa * w + pm1 * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        }
    };
    // Uniform direction orthogonal to mu.
    let mu_unit: Vec<f64> = {
        let n = dot(mu, mu).sqrt();
        mu.iter().map(|v| v / n).collect()
    };
    let mut v = standard_normal_vec(rng, p);
    v = m.project_tangent(&mu_unit, &v);
    let nv = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|c| *c *= (1.0 - w * w).max(0.0).sqrt() / nv);
    axpy(w, &mu_unit, &mut v);
    m.project_point(&mut v);
    Ok(v)
}

/// `E <x, mu>` under vMF on `S^2`: `coth kappa - 1/kappa`.
pub fn vmf_s2_mean_cosine(kappa: f64) -> f64 {
    if kappa < 1e-6 {
        kappa / 3.0
    } else {
        1.0 / kappa.tanh() - 1.0 / kappa
    }
}

/// Draw from `N(mean, I / c)`.
pub fn sample_gaussian<R: Rng + ?Sized>(c: f64, mean: &[f64], rng: &mut R) -> Vec<f64> {
    let sd = 1.0 / c.sqrt();
    standard_normal_vec(rng, mean.len()).into_iter().zip(mean).map(|(z, m)| m + sd * z).collect()
}
