//! Closed-form tail and moment bounds for the geodesic chains, evaluated
//! from declared constants.

use serde::{Deserialize, Serialize};

/// Declared constants for the dissipative tail bound of SGLD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailConstants {
    pub m: f64,
    pub l_beta: f64,
    /// Dissipativity radius.
    pub radius: f64,
    pub l_r: f64,
    /// Intrinsic dimension.
    pub d: f64,
    pub sigma: f64,
}

impl TailConstants {
    /// Largest stepsize for which the tail bound at radius `r` applies.
    pub fn max_stepsize(&self, r: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let grow = 1.0 + self.l_r.sqrt() * r;
        let a = self.m / (16.0 * self.l_beta * self.l_beta * grow);
        let b = (self.d + s2) / (self.m * grow);
        let c = 32.0 * (self.d * self.d + s2 * s2) / (self.m * self.m * r * r);
        a.min(b).min(c)
    }

    /// Bound on `P(max_{k<=K} d(x_k, x*) >= r)`.
    pub fn tail_bound(&self, steps: usize, delta: f64, r: f64) -> f64 {
        let v = self.d + self.sigma * self.sigma;
        let expo = 2.0 * self.l_beta.powi(2) * self.radius.powi(2) / v + 64.0 * self.l_r * v / self.m
            - self.m * r * r / (256.0 * v);
        32.0 * steps as f64 * delta * self.m * expo.exp()
    }

    /// Radius at which the tail bound equals `level`.
    pub fn radius_for_level(&self, steps: usize, delta: f64, level: f64) -> f64 {
        let v = self.d + self.sigma * self.sigma;
        let base = 2.0 * self.l_beta.powi(2) * self.radius.powi(2) / v + 64.0 * self.l_r * v / self.m;
        let need = (32.0 * steps as f64 * delta * self.m / level).ln() + base;
        (need.max(0.0) * 256.0 * v / self.m).sqrt()
    }
}

/// Fourth-moment bound under dissipativity:
/// `e^{-K delta m} E d0^4 + 2^24 L_R^2 L^8 s^8 / m^12 + 64 L^2 R^4 / m^2 + 128 s^4 / m^2`,
/// where `s^4` bounds the fourth moment of the noise.
pub fn fourth_moment_bound(steps: usize, delta: f64, c: &TailConstants, noise_m4: f64, e_d0_4: f64) -> f64 {
    let m = c.m;
    (-(steps as f64) * delta * m).exp() * e_d0_4
        + 2f64.powi(24) * c.l_r.powi(2) * c.l_beta.powi(8) * noise_m4.powi(2) / m.powi(12)
        + 64.0 * c.l_beta.powi(2) * c.radius.powi(4) / (m * m)
        + 128.0 * noise_m4 / (m * m)
}

/// Stepsize condition of the fourth-moment bound.
pub fn fourth_moment_max_stepsize(m: f64, l_beta: f64) -> f64 {
    m / (128.0 * l_beta * l_beta)
}

/// Second-moment bound on `d(x_k, x_0)` under a Lipschitz drift:
/// `4 exp(8 K delta L + K delta L_R s2 + K delta^2 L_R L0^2) (2 K delta s2 + 8 K^2 delta^2 L0^2)`
/// with `s2` the noise second moment and `L0 = |beta(x_0)|`.
pub fn second_moment_bound(steps: usize, delta: f64, l_beta: f64, l_r: f64, noise_m2: f64, l0: f64) -> f64 {
    let k = steps as f64;
    4.0 * (8.0 * k * delta * l_beta + k * delta * l_r * noise_m2 + k * delta * delta * l_r * l0 * l0).exp()
        * (2.0 * k * delta * noise_m2 + 8.0 * k * k * delta * delta * l0 * l0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_inverts_tail_bound() {
        let c = TailConstants { m: 0.5, l_beta: 0.5, radius: 0.0, l_r: 0.0, d: 2.0, sigma: 0.0 };
        let r = c.radius_for_level(10_000, 0.01, 0.01);
        assert!((c.tail_bound(10_000, 0.01, r) - 0.01).abs() < 1e-12);
    }
}
