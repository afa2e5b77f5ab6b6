//! SGLD on a Gaussian finite sum: gap to the exact-gradient chain under
//! shared noise, and the running-maximum tail check.
//!
//! Usage: cargo run --release --example sgld -- [reps]

use manifold_langevin::diagnostics::bounds::TailConstants;
use manifold_langevin::diagnostics::loglog_slope;
use manifold_langevin::potentials::StochasticGradOracle;
use manifold_langevin::scans::{centered_anchors, gaussian_gap, sgld_gap_table, tail_check};

fn main() -> manifold_langevin::Result<()> {
    let reps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let c = 1.0;
    let anchors = centered_anchors(10, 4, 1.0, 0);
    let oracle = StochasticGradOracle::gaussian_anchors(c, &anchors)?;
    let deltas: Vec<f64> = (3..=7).map(|k| 2f64.powi(-k)).collect();

    let rows = sgld_gap_table(&oracle, &[0.0; 4], 16.0, &deltas, reps, 1)?;
    println!("{:>10} {:>12} {:>10} {:>12}", "delta", "E gap^2", "stderr", "exact");
    for r in &rows {
        let exact = gaussian_gap(c, &anchors, r.delta, r.steps);
        println!("{:>10.5} {:>12.4e} {:>10.2e} {:>12.4e}", r.delta, r.gap, r.stderr, exact);
    }
    let fit = loglog_slope(&deltas, &rows.iter().map(|r| r.gap).collect::<Vec<_>>())?;
    println!("slope vs delta {:.3}\n", fit.slope);

    let constants = TailConstants { m: c / 2.0, l_beta: c / 2.0, radius: 0.0, l_r: 0.0, d: 4.0, sigma: oracle.sigma };
    let t = tail_check(&oracle, &constants, &[0.0; 4], 10_000, 0.01, 0.01, 100, 2)?;
    println!(
        "tail: radius {:.2}, bound {:.3e}, observed {} of {} runs, largest distance seen {:.2}",
        t.radius,
        t.bound,
        (t.observed.fraction * t.observed.n as f64).round(),
        t.observed.n,
        t.max_distance
    );
    println!("stepsize limit of the bound at this radius: {:.3e}", t.max_stepsize);
    Ok(())
}
