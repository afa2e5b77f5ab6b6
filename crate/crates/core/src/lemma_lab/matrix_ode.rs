//! The matrix exponent of `d/dt [x; y] = [[0, I], [M(t), 0]] [x; y]` and its
//! block norm bounds.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use super::{merge_reports, Check};
use crate::error::{invalid, Result};
use crate::noise::{keyed_rng, standard_normal_vec, Stream};

/// Default RK4 step for [`emat`].
pub const EMAT_STEP: f64 = 1e-3;

/// Symmetric `d x d` matrices along `t` in `[0, 1]` with declared bounds
/// `|M(t)|_2 <= L_M` and `|M(t) - M(0)|_2 <= L_M'`.
pub trait MatrixPath: Sync {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> DMatrix<f64>;
    fn l_m(&self) -> f64;
    fn l_m_prime(&self) -> f64;
}

pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Largest `|M(t)|_2` and `|M(t) - M(0)|_2` over `n + 1` grid points.
pub fn sampled_norms(path: &dyn MatrixPath, n: usize) -> (f64, f64) {
    let m0 = path.at(0.0);
    (0..=n).fold((0.0f64, 0.0f64), |(a, b), j| {
        let m = path.at(j as f64 / n as f64);
        (a.max(op_norm(&m)), b.max(op_norm(&(&m - &m0))))
    })
}

/// Declared bounds hold on a 100-point grid.
pub fn validate_path(path: &dyn MatrixPath) -> Result<()> {
    let (l, lp) = sampled_norms(path, 100);
    if l > path.l_m() * (1.0 + 1e-12) || lp > path.l_m_prime() * (1.0 + 1e-12) {
        return Err(invalid(format!(
            "declared bounds ({}, {}) below sampled norms ({l}, {lp})",
            path.l_m(),
            path.l_m_prime()
        )));
    }
    Ok(())
}

/// `M(t) = M0 + sin(pi t) M1`.
#[derive(Clone, Debug)]
pub struct SinePath {
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub l_m: f64,
    pub l_m_prime: f64,
}

impl SinePath {
    /// Declares `L_M = |M0| + |M1|`, `L_M' = |M1|`.
    pub fn new(m0: DMatrix<f64>, m1: DMatrix<f64>) -> Result<Self> {
        if !m0.is_square() || m0.shape() != m1.shape() {
            return Err(invalid("M0 and M1 must be square of equal size"));
        }
        if (&m0 - m0.transpose()).amax() > 1e-14 || (&m1 - m1.transpose()).amax() > 1e-14 {
            return Err(invalid("M0 and M1 must be symmetric"));
        }
        let (a, b) = (op_norm(&m0), op_norm(&m1));
        Ok(Self { m0, m1, l_m: a + b, l_m_prime: b })
    }

    /// Random symmetric `M0`, `M1` with operator norms `s0` and `s1`.
    pub fn random<R: Rng + ?Sized>(d: usize, s0: f64, s1: f64, rng: &mut R) -> Self {
        let m0 = random_symmetric(d, s0, rng);
        let m1 = random_symmetric(d, s1, rng);
        Self::new(m0, m1).expect("random matrices are square and symmetric")
    }
}

impl MatrixPath for SinePath {
    fn dim(&self) -> usize {
        self.m0.nrows()
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        &self.m0 + &self.m1 * (std::f64::consts::PI * t).sin()
    }

    fn l_m(&self) -> f64 {
        self.l_m
    }

    fn l_m_prime(&self) -> f64 {
        self.l_m_prime
    }
}

#[derive(Clone, Debug)]
pub struct ConstantPath {
    pub m: DMatrix<f64>,
}

impl MatrixPath for ConstantPath {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn at(&self, _t: f64) -> DMatrix<f64> {
        self.m.clone()
    }

    fn l_m(&self) -> f64 {
        op_norm(&self.m)
    }

    fn l_m_prime(&self) -> f64 {
        0.0
    }
}

/// A path with its declared bounds replaced, for negative controls.
pub struct Declared<'a> {
    pub path: &'a dyn MatrixPath,
    pub l_m: f64,
    pub l_m_prime: f64,
}

impl MatrixPath for Declared<'_> {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn at(&self, t: f64) -> DMatrix<f64> {
        self.path.at(t)
    }

    fn l_m(&self) -> f64 {
        self.l_m
    }

    fn l_m_prime(&self) -> f64 {
        self.l_m_prime
    }
}

/// Symmetric matrix with Gaussian entries rescaled to operator norm `norm`.
pub fn random_symmetric<R: Rng + ?Sized>(d: usize, norm: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_vec(d, d, standard_normal_vec(rng, d * d));
    let s = (&g + g.transpose()) * 0.5;
    let n = op_norm(&s);
    if n == 0.0 {
        s
    } else {
        s * (norm / n)
    }
}

/// `A, B, C, D` blocks of the `2d x 2d` matrix exponent.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Blocks {
    fn from_full(e: &DMatrix<f64>, d: usize) -> Self {
        Self {
            a: e.view((0, 0), (d, d)).into_owned(),
            b: e.view((0, d), (d, d)).into_owned(),
            c: e.view((d, 0), (d, d)).into_owned(),
            d: e.view((d, d), (d, d)).into_owned(),
        }
    }

    pub fn max_abs_diff(&self, other: &Blocks) -> f64 {
        [(&self.a, &other.a), (&self.b, &other.b), (&self.c, &other.c), (&self.d, &other.d)]
            .iter()
            .map(|(x, y)| (*x - *y).amax())
            .fold(0.0, f64::max)
    }
}

fn generator(path: &dyn MatrixPath, t: f64) -> DMatrix<f64> {
    let d = path.dim();
    let mut n = DMatrix::zeros(2 * d, 2 * d);
    n.view_mut((0, d), (d, d)).fill_with_identity();
    n.view_mut((d, 0), (d, d)).copy_from(&path.at(t));
    n
}

/// Solution of `dE/dt = N(t) E` from `E(t0)` over `[t0, t1]` by RK4 with
/// steps of at most `h`.
pub fn rk4_matrix<F>(n_of_t: F, e0: DMatrix<f64>, t0: f64, t1: f64, h: f64) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let steps = ((t1 - t0) / h).ceil().max(0.0) as usize;
    let mut e = e0;
    if steps == 0 {
        return e;
    }
    let dt = (t1 - t0) / steps as f64;
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let nm = n_of_t(t + 0.5 * dt);
        let k1 = n_of_t(t) * &e;
        let k2 = &nm * (&e + &k1 * (0.5 * dt));
        let k3 = &nm * (&e + &k2 * (0.5 * dt));
        let k4 = n_of_t(t + dt) * (&e + &k3 * dt);
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    e
}

/// Blocks at time `t` with RK4 step `h`.
pub fn emat_with_step(path: &dyn MatrixPath, t: f64, h: f64) -> Result<Blocks> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!("t = {t} outside [0, 1]")));
    }
    let d = path.dim();
    let e = rk4_matrix(|s| generator(path, s), DMatrix::identity(2 * d, 2 * d), 0.0, t, h);
    Ok(Blocks::from_full(&e, d))
}

pub fn emat(path: &dyn MatrixPath, t: f64) -> Result<Blocks> {
    emat_with_step(path, t, EMAT_STEP)
}

/// Blocks at each time of the nondecreasing grid `ts`, integrating once.
pub fn emat_grid(path: &dyn MatrixPath, ts: &[f64], h: f64) -> Result<Vec<Blocks>> {
    let d = path.dim();
    let mut e = DMatrix::identity(2 * d, 2 * d);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(ts.len());
    for &s in ts {
        if !(s >= t && s <= 1.0) {
            return Err(invalid("time grid must be nondecreasing within [0, 1]"));
        }
        e = rk4_matrix(|r| generator(path, r), e, t, s, h);
        t = s;
        out.push(Blocks::from_full(&e, d));
    }
    Ok(out)
}

/// Closed form for constant symmetric `M = Q diag(l) Q^T`: on each
/// eigendirection the scalar system `x'' = l x` is solved exactly.
pub fn constant_blocks(m: &DMatrix<f64>, t: f64) -> Blocks {
    let eig = SymmetricEigen::new(m.clone());
    let q = &eig.eigenvectors;
    let scal = |f: &dyn Fn(f64) -> f64| {
        let diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
        q * diag * q.transpose()
    };
    // (cosh, sinh/s, s sinh) continued to l <= 0.
    let ch = |l: f64| if l >= 0.0 { (l.sqrt() * t).cosh() } else { ((-l).sqrt() * t).cos() };
    let sh = |l: f64| {
        if l > 0.0 {
            (l.sqrt() * t).sinh() / l.sqrt()
        } else if l < 0.0 {
            ((-l).sqrt() * t).sin() / (-l).sqrt()
        } else {
            t
        }
    };
    let csh = |l: f64| {
        if l >= 0.0 {
            l.sqrt() * (l.sqrt() * t).sinh()
        } else {
            -(-l).sqrt() * ((-l).sqrt() * t).sin()
        }
    };
    Blocks { a: scal(&ch), b: scal(&sh), c: scal(&csh), d: scal(&ch) }
}

/// Evaluate every block bound at each time in `ts`.
///
/// Bounds, with `s = sqrt(L_M)`:
/// `|A|, |D| <= cosh(s t)`, `|B| <= sinh(s t)/s`, `|C| <= s sinh(s t)`,
/// `|A - I|, |D - I| <= cosh(s t) - 1`, `|B - t I| <= sinh(s t)/s - t`,
/// `|C - t M(0)| <= (L_M' + L_M^2/2) sinh(s t)/s`, and the cruder
/// `|A - I|, |D - I| <= L_M e^{L_M}/2`, `|B - t I| <= L_M e^{L_M}/6`,
/// `|C| <= L_M e^{L_M}`.
pub fn check_block_bounds(path: &dyn MatrixPath, ts: &[f64]) -> Result<Vec<Check>> {
    let blocks = emat_grid(path, ts, EMAT_STEP)?;
    let d = path.dim();
    let l = path.l_m();
    let lp = path.l_m_prime();
    let s = l.sqrt();
    let m0 = path.at(0.0);
    let eye = DMatrix::<f64>::identity(d, d);
    let names = [
        "|A| <= cosh",
        "|B| <= sinh/s",
        "|C| <= s sinh",
        "|D| <= cosh",
        "|A-I| <= cosh-1",
        "|B-tI| <= sinh/s-t",
        "|D-I| <= cosh-1",
        "|C-tM(0)| <= (L'+L^2/2) sinh/s",
        "|A-I| <= L e^L/2",
        "|B-tI| <= L e^L/6",
        "|D-I| <= L e^L/2",
        "|C| <= L e^L",
    ];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(*n)).collect();
    for (j, (bl, &t)) in blocks.iter().zip(ts).enumerate() {
        let ch = (s * t).cosh();
        let sh_over = if s > 0.0 { (s * t).sinh() / s } else { t };
        let s_sh = s * (s * t).sinh();
        let crude = l * l.exp();
        let na = op_norm(&bl.a);
        let nb = op_norm(&bl.b);
        let nc = op_norm(&bl.c);
        let nd = op_norm(&bl.d);
        let na1 = op_norm(&(&bl.a - &eye));
        let nbt = op_norm(&(&bl.b - &eye * t));
        let nd1 = op_norm(&(&bl.d - &eye));
        let nc2 = op_norm(&(&bl.c - &m0 * t));
        let rows = [
            (na, ch),
            (nb, sh_over),
            (nc, s_sh),
            (nd, ch),
            (na1, ch - 1.0),
            (nbt, sh_over - t),
            (nd1, ch - 1.0),
            (nc2, (lp + 0.5 * l * l) * sh_over),
            (na1, 0.5 * crude),
            (nbt, crude / 6.0),
            (nd1, 0.5 * crude),
            (nc, crude),
        ];
        for (c, (lhs, rhs)) in checks.iter_mut().zip(rows) {
            c.record(j, lhs, rhs);
        }
    }
    Ok(checks)
}

/// Block bounds for `trials` random sine paths of size `dim` with
/// `|M0| ~ U(0, 2)` and `|M1| ~ U(0, 1)`, on 11 times in `[0, 1]`.
/// `worst_trial` is the path index.
pub fn matrix_ode_suite(trials: usize, dim: usize, seed: u64) -> Result<Vec<Check>> {
    let ts: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
    let reports = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = keyed_rng(seed, Stream::Probe, i as u64, 4);
            let s0 = 2.0 * rng.random::<f64>();
            let s1 = rng.random::<f64>();
            let path = SinePath::random(dim, s0, s1, &mut rng);
            let mut checks = check_block_bounds(&path, &ts)?;
            checks.iter_mut().for_each(|c| c.worst_trial = i);
            Ok(checks)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_reports(reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_path_blocks() {
        let p = ConstantPath { m: DMatrix::zeros(3, 3) };
        let b = emat(&p, 0.7).unwrap();
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((&b.a - &eye).amax() < 1e-15);
        assert!((&b.b - &eye * 0.7).amax() < 1e-14);
        assert!(b.c.amax() < 1e-15);
        assert!((&b.d - &eye).amax() < 1e-15);
    }

    #[test]
    fn scalar_multiple_of_identity() {
        let c: f64 = 2.5;
        let p = ConstantPath { m: DMatrix::identity(2, 2) * c };
        let t = 0.9;
        let b = emat(&p, t).unwrap();
        let r = c.sqrt();
        assert!((b.a[(0, 0)] - (r * t).cosh()).abs() < 1e-8);
        assert!((b.b[(1, 1)] - (r * t).sinh() / r).abs() < 1e-8);
        assert!((b.c[(0, 0)] - r * (r * t).sinh()).abs() < 1e-8);
        assert!(b.a[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_matches_eigen_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let m = random_symmetric(3, 2.0, &mut rng);
            let b = emat(&ConstantPath { m: m.clone() }, 1.0).unwrap();
            assert!(b.max_abs_diff(&constant_blocks(&m, 1.0)) < 1e-8);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = SinePath::random(3, 2.0, 1.0, &mut rng);
        let exact = emat_with_step(&p, 1.0, 1e-3 / 8.0).unwrap();
        let e1 = emat_with_step(&p, 1.0, 0.1).unwrap().max_abs_diff(&exact);
        let e2 = emat_with_step(&p, 1.0, 0.05).unwrap().max_abs_diff(&exact);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.3, "observed order {order}");
        let half = emat_with_step(&p, 1.0, 5e-4).unwrap();
        assert!(emat(&p, 1.0).unwrap().max_abs_diff(&half) < 1e-9);
    }

    #[test]
    fn zero_path_bounds_are_tight() {
        let p = ConstantPath { m: DMatrix::zeros(2, 2) };
        let ts: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
        let checks = check_block_bounds(&p, &ts).unwrap();
        assert!(checks.iter().all(|c| c.passed() && c.worst_slack.abs() < 1e-12));
    }

    #[test]
    fn understated_norm_is_caught() {
        let p = ConstantPath { m: DMatrix::identity(2, 2) * 4.0 };
        let lie = Declared { path: &p, l_m: 1.0, l_m_prime: 0.0 };
        assert!(validate_path(&lie).is_err());
        let checks = check_block_bounds(&lie, &[0.5, 1.0]).unwrap();
        assert!(checks.iter().any(|c| !c.passed()));
        assert!(check_block_bounds(&p, &[0.5, 1.0]).unwrap().iter().all(Check::passed));
    }
}
