//! Randomized inequality suites on spheres and hyperbolic spaces, with a
//! negative control that declares flat curvature on hyperbolic space.
//!
//! Usage: cargo run --release --example lemma_checks -- [trials]

use manifold_langevin::lemma_lab::distance::{triangle_suite, two_point_suite, DistanceOptions};
use manifold_langevin::lemma_lab::jacobi::{jacobi_suite, SuiteOptions};
use manifold_langevin::lemma_lab::matrix_ode::matrix_ode_suite;
use manifold_langevin::lemma_lab::{lyapunov_suite, Check};
use manifold_langevin::lyapunov::PsiScale;
use manifold_langevin::Manifold;

fn show(title: &str, checks: &[Check]) {
    println!("{title}");
    for c in checks {
        let mark = if c.passed() { "ok" } else { "FAIL" };
        println!("  {:<44} {:>6} evals {:>5} bad  worst slack {:>11.3e}  {mark}", c.name, c.evaluations, c.violations, c.worst_slack);
    }
}

fn main() -> manifold_langevin::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    show("matrix ODE blocks", &matrix_ode_suite(trials / 10, 3, 1)?);
    show("f properties (full rate)", &lyapunov_suite(20, 2000, PsiScale::Full, 1)?);
    for m in [Manifold::sphere(3), Manifold::hyperboloid(2), Manifold::sphere(4), Manifold::hyperboloid(3)] {
        let name = format!("{} (intrinsic dim {})", m.name(), m.intrinsic_dim());
        show(&format!("jacobi, {name}"), &jacobi_suite(&m, trials, 1.0, 1, SuiteOptions::default())?);
        show(&format!("triangle, {name}"), &triangle_suite(&m, trials, 1, DistanceOptions::default())?);
        show(&format!("two-point, {name}"), &two_point_suite(&m, trials, 0.5, 1, DistanceOptions::default())?);
    }
    let flat = DistanceOptions { l_r_override: Some(0.0), ..Default::default() };
    show("negative control: L_R = 0 on H^2", &two_point_suite(&Manifold::hyperboloid(2), trials, 0.5, 1, flat)?);
    Ok(())
}
