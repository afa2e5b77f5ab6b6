//! W1 to an exact vMF cloud as a function of the stepsize, with all
//! stepsizes of a sample driven by one Brownian path.
//!
//! Usage: cargo run --release --example w1_scaling -- [reps] [samples]

use manifold_langevin::potentials::VonMisesFisher;
use manifold_langevin::scans::{summarize_w1, w1_stepsize_table};

fn main() -> manifold_langevin::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(512);
    let p = VonMisesFisher::new(4.0, vec![0.0, 0.0, 1.0])?;
    let deltas: Vec<f64> = (4..=8).chain([10]).map(|k| 2f64.powi(-k)).collect();
    let rows = w1_stepsize_table(&p, 8.0, &deltas, n, reps, 1)?;
    println!("{:>10} {:>5} {:>10} {:>9} {:>11} {:>9}", "delta", "level", "W1", "stderr", "excess", "stderr");
    for r in &rows {
        println!("{:>10.6} {:>5} {:>10.5} {:>9.5} {:>11.3e} {:>9.1e}", r.delta, r.level, r.w1, r.stderr, r.excess, r.excess_stderr);
    }
    let s = summarize_w1(&rows);
    match s.fit {
        Some(f) => println!("excess slope vs delta {:.3} (r^2 {:.3})", f.slope, f.r2),
        None => println!("excess not positive at every stepsize; no fit"),
    }
    println!("monotonicity violations: {:?}", s.monotone_violations);
    Ok(())
}
