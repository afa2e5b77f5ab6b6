//! The concave distance function `f_eps` used to measure contraction under
//! reflection coupling, and the resulting mixing rate.
//!
//! With `mu` the cutoff (1 up to `R`, linear down to 0 on `[R, R+eps]`),
//!
//! ```text
//! psi(r) = exp(-L * int_0^r s mu(s) ds),     Psi(r) = int_0^r psi
//! nu(r)  = 1 - A(r) / (2 A(inf)),            A(r) = int_0^r mu Psi / psi
//! f(r)   = int_0^r psi nu,                   g(s) = f(sqrt(s + eps))
//! ```
//!
//! `(Psi, A, G = int psi A)` solve a triangular linear ODE, tabulated with
//! RK4 on a grid that has `R` and `R + eps` as knots, so `f = Psi - G/(2D)`
//! needs no nested quadrature.
//!
//! The exponent rate of `psi` is selectable: [`PsiScale::Full`] (rate `L`)
//! is the one for which `f'' + L r f' = psi nu'` on `[0, R]`, which the
//! shape properties rely on; [`PsiScale::Half`] (rate `L/2`) is kept for
//! comparison and fails the fourth property.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::rk4_step;

/// Absolute slack allowed when checking the shape properties.
pub const PROPERTY_TOL: f64 = 1e-6;

const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    /// Curvature-like constant `L`.
    pub l: f64,
    /// Radius `R` beyond which the drift is dissipative.
    pub r: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub scale: PsiScale,
}

/// Rate in the exponent of `psi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiScale {
    #[default]
    Full,
    Half,
}

impl LyapunovParams {
    pub fn new(l: f64, r: f64, epsilon: f64) -> Self {
        Self { l, r, epsilon, scale: PsiScale::Full }
    }

    /// Coefficient `k` in `psi = exp(-k L int s mu)`.
    pub fn rate(&self) -> f64 {
        match self.scale {
            PsiScale::Full => self.l,
            PsiScale::Half => 0.5 * self.l,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l >= 0.0 && self.r >= 0.0 && self.epsilon >= 0.0) {
            return Err(invalid("L, R and eps must be nonnegative"));
        }
        if self.r + self.epsilon == 0.0 {
            return Err(invalid("R + eps must be positive (the normaliser vanishes otherwise)"));
        }
        if self.l > 0.0 && self.epsilon > 1.0 / (4.0 * self.l.sqrt()) {
            return Err(invalid(format!("eps = {} exceeds 1/(4 sqrt L) = {}", self.epsilon, 1.0 / (4.0 * self.l.sqrt()))));
        }
        Ok(())
    }

    /// `exp(-(1 + eps) L R^2 / 2)`.
    pub fn decay(&self) -> f64 {
        (-(1.0 + self.epsilon) * self.l * self.r * self.r / 2.0).exp()
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovFunction {
    params: LyapunovParams,
    knots: Vec<f64>,
    states: Vec<[f64; 3]>,
    normaliser: f64,
}

impl LyapunovFunction {
    pub fn new(params: LyapunovParams) -> Result<Self> {
        Self::with_tolerance(params, DEFAULT_TOL)
    }

    /// Tabulate with a step chosen so the RK4 error is of order `tol`.
    pub fn with_tolerance(params: LyapunovParams, tol: f64) -> Result<Self> {
        params.validate()?;
        if !(tol > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        let h = (tol.powf(0.25) / 4.0).min(0.01);
        let mut knots = vec![0.0];
        for (a, b) in [(0.0, params.r), (params.r, params.r + params.epsilon)] {
            let n = ((b - a) / h).ceil() as usize;
            for j in 1..=n {
                knots.push(a + (b - a) * j as f64 / n as f64);
            }
        }
        let mut this = Self { params, knots, states: Vec::new(), normaliser: f64::NAN };
        let rhs = |r: f64, y: &[f64], out: &mut [f64]| this.rhs(r, y, out);
        let mut states = vec![[0.0; 3]];
        let mut y = [0.0; 3];
        for w in this.knots.windows(2) {
            rk4_step(&rhs, w[0], &mut y, w[1] - w[0]);
            states.push(y);
        }
        let normaliser = y[1];
        this.states = states;
        this.normaliser = normaliser;
        Ok(this)
    }

    pub fn params(&self) -> LyapunovParams {
        self.params
    }

    fn rhs(&self, r: f64, y: &[f64], out: &mut [f64]) {
        let psi = self.psi(r);
        out[0] = psi;
        out[1] = self.mu(r) * y[0] / psi;
        out[2] = psi * y[1];
    }

    pub fn mu(&self, r: f64) -> f64 {
        let LyapunovParams { r: big_r, epsilon, .. } = self.params;
        if r <= big_r {
            1.0
        } else if r < big_r + epsilon {
            1.0 - (r - big_r) / epsilon
        } else {
            0.0
        }
    }

    /// `int_0^r s mu(s) ds` in closed form.
    fn mu_moment(&self, r: f64) -> f64 {
        let LyapunovParams { r: big_r, epsilon, .. } = self.params;
        let partial = |r: f64| {
            let cubic = (r.powi(3) - big_r.powi(3)) / 3.0 - big_r * (r * r - big_r * big_r) / 2.0;
            big_r * big_r / 2.0 + (r * r - big_r * big_r) / 2.0 - cubic / epsilon
        };
        if r <= big_r {
            r * r / 2.0
        } else if r < big_r + epsilon {
            partial(r)
        } else if epsilon > 0.0 {
            partial(big_r + epsilon)
        } else {
            big_r * big_r / 2.0
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        (-self.params.rate() * self.mu_moment(r)).exp()
    }

    /// `(Psi, A, G)` at `r`.
    fn state(&self, r: f64) -> [f64; 3] {
        let end = *self.knots.last().expect("grid has a knot");
        if r >= end {
            let s = self.states.last().expect("state at every knot");
            let psi = self.psi(end);
            let dr = r - end;
            return [s[0] + psi * dr, s[1], s[2] + psi * s[1] * dr];
        }
        let j = self.knots.partition_point(|&k| k <= r) - 1;
        let mut y = self.states[j];
        let rhs = |t: f64, y: &[f64], out: &mut [f64]| self.rhs(t, y, out);
        if r > self.knots[j] {
            rk4_step(&rhs, self.knots[j], &mut y, r - self.knots[j]);
        }
        y
    }

    /// `A(inf) = int_0^{R+eps} mu Psi / psi`.
    pub fn normaliser(&self) -> f64 {
        self.normaliser
    }

    pub fn big_psi(&self, r: f64) -> f64 {
        self.state(r)[0]
    }

    pub fn nu(&self, r: f64) -> f64 {
        1.0 - self.state(r)[1] / (2.0 * self.normaliser)
    }

    pub fn f(&self, r: f64) -> f64 {
        let y = self.state(r);
        y[0] - y[2] / (2.0 * self.normaliser)
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        self.psi(r) * self.nu(r)
    }

    /// `f'' = -k L r mu psi nu - mu Psi / (2 A(inf))`.
    pub fn f_second(&self, r: f64) -> f64 {
        let y = self.state(r);
        let mu = self.mu(r);
        let psi = self.psi(r);
        let nu = 1.0 - y[1] / (2.0 * self.normaliser);
        -self.params.rate() * r * mu * psi * nu - mu * y[0] / (2.0 * self.normaliser)
    }

    /// `f''` from central differences of `f'` with one Richardson step.
    pub fn f_second_fd(&self, r: f64, h: f64) -> f64 {
        let d = |h: f64| (self.f_prime(r + h) - self.f_prime(r - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    pub fn g(&self, s: f64) -> f64 {
        self.f((s + self.params.epsilon).sqrt())
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        let r = (s + self.params.epsilon).sqrt();
        self.f_prime(r) / (2.0 * r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    /// Smallest `rhs - lhs` over the grid; negative means violated.
    pub worst_slack: f64,
    pub worst_at: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: &str) -> Self {
        Self { name: name.into(), worst_slack: f64::INFINITY, worst_at: f64::NAN, passed: true }
    }

    fn record(&mut self, r: f64, slack: f64) {
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.worst_at = r;
        }
        self.passed = self.worst_slack >= -PROPERTY_TOL;
    }
}

/// Check the four shape properties of `f_eps` on `n_grid + 1` points of
/// `[0, 2(R+eps) + 1]`. Second derivatives come from differences of the
/// exact `f'`; grid points within one cell of the kinks at `R` and `R+eps`
/// are skipped for them.
pub fn check_f_properties(params: LyapunovParams, n_grid: usize) -> Result<Vec<PropertyCheck>> {
    let lf = LyapunovFunction::new(params)?;
    let LyapunovParams { l, r: big_r, epsilon, .. } = params;
    let c = params.decay();
    let r_max = 2.0 * (big_r + epsilon) + 1.0;
    let cell = r_max / n_grid as f64;
    let h = 1e-4;
    let mut p1 = PropertyCheck::new("f(r) within [c r, r]");
    let mut p2 = PropertyCheck::new("f'(r) within [c, 1]");
    let mut p3 = PropertyCheck::new("f''(r) within [-4 L^1.5, 0]");
    let mut p4 = PropertyCheck::new("f'' + L r f' <= -c f / ((1+eps)^2 R^2) on [0, R]");
    for j in 0..=n_grid {
        let r = j as f64 * cell;
        let f = lf.f(r);
        let fp = lf.f_prime(r);
        p1.record(r, (f - 0.5 * c * r).min(r - f));
        p2.record(r, (fp - 0.5 * c).min(1.0 - fp));
        let near_kink = (r - big_r).abs() <= cell || (r - big_r - epsilon).abs() <= cell;
        if r < h || near_kink {
            continue;
        }
        let fpp = lf.f_second_fd(r, h);
        p3.record(r, (fpp + 4.0 * l.powf(1.5)).min(-fpp));
        if r <= big_r && big_r > 0.0 {
            let rhs = -c / ((1.0 + epsilon).powi(2) * big_r * big_r) * f;
            p4.record(r, rhs - (fpp + l * r * fp));
        }
    }
    Ok(vec![p1, p2, p3, p4])
}

/// Contraction rate `min((m - L_Ric/2)/16, 1/(2R^2)) * exp(-(q + L_Ric/2) R^2 / 2)`,
/// with `q + L_Ric/2` floored at zero.
pub fn mixing_alpha(m: f64, l_ric: f64, q: f64, r: f64) -> Result<f64> {
    if !(m - l_ric / 2.0 > 0.0) {
        return Err(invalid(format!("need m > L_Ric/2 (m = {m}, L_Ric = {l_ric})")));
    }
    if !(r >= 0.0) {
        return Err(invalid("R must be nonnegative"));
    }
    let q = q.max(-l_ric / 2.0);
    let near = if r == 0.0 { f64::INFINITY } else { 1.0 / (2.0 * r * r) };
    Ok(((m - l_ric / 2.0) / 16.0).min(near) * (-(q + l_ric / 2.0) * r * r / 2.0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lf(l: f64, r: f64, epsilon: f64) -> LyapunovFunction {
        LyapunovFunction::new(LyapunovParams::new(l, r, epsilon)).unwrap()
    }

    #[test]
    fn flat_case_closed_form() {
        // L = 0, R = 1: nu = 1 - r^2/2 on [0,1], f(1) = 5/6, f = 5/6 + (r-1)/2 beyond.
        let f = lf(0.0, 1.0, 0.0);
        assert!((f.f(1.0) - 5.0 / 6.0).abs() < 1e-9);
        assert!((f.f(0.5) - (0.5 - 0.125 / 6.0)).abs() < 1e-9);
        assert!((f.f(3.0) - (5.0 / 6.0 + 1.0)).abs() < 1e-9);
        assert!((f.f_prime(2.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn psi_is_gaussian_inside_radius() {
        let full = lf(2.0, 1.5, 0.0);
        let half = LyapunovFunction::new(LyapunovParams { scale: PsiScale::Half, ..LyapunovParams::new(2.0, 1.5, 0.0) }).unwrap();
        for r in [0.0, 0.3, 1.0, 1.5] {
            assert!((full.psi(r) - (-2.0 * r * r / 2.0).exp()).abs() < 1e-15);
            assert!((half.psi(r) - (-2.0 * r * r / 4.0).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn analytic_and_difference_second_derivatives_agree() {
        let f = lf(1.0, 1.2, 0.2);
        for r in [0.3, 0.9, 1.3, 2.0] {
            assert!((f.f_second(r) - f.f_second_fd(r, 1e-4)).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn g_matches_definition() {
        let f = lf(1.0, 1.0, 0.1);
        assert!((f.g(0.5) - f.f(0.6f64.sqrt())).abs() < 1e-15);
        let h = 1e-5;
        let fd = (f.g(0.5 + h) - f.g(0.5 - h)) / (2.0 * h);
        assert!((fd - f.g_prime(0.5)).abs() < 1e-8);
    }

    #[test]
    fn tolerance_halving_changes_little() {
        let p = LyapunovParams::new(3.0, 1.0, 0.1);
        let a = LyapunovFunction::with_tolerance(p, 1e-9).unwrap();
        let b = LyapunovFunction::with_tolerance(p, 5e-10).unwrap();
        for r in [0.2, 0.7, 1.05, 4.0] {
            assert!((a.f(r) - b.f(r)).abs() < 1e-8);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LyapunovFunction::new(LyapunovParams::new(1.0, 1.0, 0.5)).is_err());
        assert!(LyapunovFunction::new(LyapunovParams::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn mixing_rate_cases() {
        assert!((mixing_alpha(1.0, 0.0, 0.0, 0.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        // Floored q: same rate as q = -L_Ric/2.
        let a = mixing_alpha(1.0, 1.0, -5.0, 1.0).unwrap();
        let b = mixing_alpha(1.0, 1.0, -0.5, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(mixing_alpha(0.4, 1.0, 0.0, 1.0).is_err());
    }
}
