//! One-step and adjacent-level error scaling of the dyadic construction on S^2.
//!
//! Usage: cargo run --example multilevel_error -- [reps] [horizon]

use manifold_langevin::potentials::VonMisesFisher;
use manifold_langevin::samplers::{adjacent_level_error_table, one_step_error_table};
use manifold_langevin::diagnostics::loglog_slope;

fn main() -> manifold_langevin::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let horizon: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.25);
    let p = VonMisesFisher::new(1.0, vec![0.0, 0.0, 1.0])?;
    let x0 = [1.0, 0.0, 0.0];

    let horizons: Vec<f64> = (2..=6).rev().map(|k| 2f64.powi(-k)).collect();
    let rows = one_step_error_table(&p, &x0, &horizons, 9, reps, 1)?;
    println!("{:>10} {:>14} {:>12}", "T", "E d^2", "stderr");
    for r in &rows {
        println!("{:>10.5} {:>14.6e} {:>12.3e}", r.x, r.mean, r.stderr);
    }
    let fit = loglog_slope(&horizons, &rows.iter().map(|r| r.mean).collect::<Vec<_>>())?;
    println!("slope {:.3}  r^2 {:.4}\n", fit.slope, fit.r2);

    let levels: Vec<u32> = (2..=8).collect();
    let rows = adjacent_level_error_table(&p, &x0, horizon, &levels, reps, 2)?;
    println!("{:>5} {:>14} {:>12} {:>14}", "i", "E max d^2", "stderr", "nodes only");
    for r in &rows {
        println!("{:>5} {:>14.6e} {:>12.3e} {:>14.6e}", r.level, r.mean, r.stderr, r.node_mean);
    }
    let xs: Vec<f64> = levels.iter().map(|&i| 2f64.powi(i as i32)).collect();
    let grid = loglog_slope(&xs, &rows.iter().map(|r| r.mean).collect::<Vec<_>>())?;
    let nodes = loglog_slope(&xs, &rows.iter().map(|r| r.node_mean).collect::<Vec<_>>())?;
    println!("log2 slope vs level: fine grid {:.3}, nodes only {:.3}", grid.slope, nodes.slope);
    Ok(())
}
