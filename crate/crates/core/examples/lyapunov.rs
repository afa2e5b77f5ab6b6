//! The concave distance function `f` and its four shape properties.
//!
//! Usage: cargo run --release --example lyapunov -- [L] [R] [eps]

use manifold_langevin::lyapunov::{check_f_properties, LyapunovFunction, LyapunovParams, PsiScale};

fn main() -> manifold_langevin::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let (l, r, eps) = (*args.first().unwrap_or(&1.0), *args.get(1).unwrap_or(&2.0), *args.get(2).unwrap_or(&0.2));
    let params = LyapunovParams::new(l, r, eps);
    let f = LyapunovFunction::new(params)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "r", "f", "f'", "f''");
    let top = 2.0 * (r + eps) + 1.0;
    for j in 0..=10 {
        let x = top * j as f64 / 10.0;
        println!("{x:>6.2} {:>10.5} {:>10.5} {:>10.5}", f.f(x), f.f_prime(x), f.f_second(x));
    }
    for scale in [PsiScale::Full, PsiScale::Half] {
        println!("\npsi scale {scale:?}:");
        for c in check_f_properties(LyapunovParams { scale, ..params }, 4000)? {
            println!("  {:<52} worst slack {:>10.3e} at r = {:.3}  {}", c.name, c.worst_slack, c.worst_at, if c.passed { "ok" } else { "VIOLATED" });
        }
    }
    Ok(())
}
