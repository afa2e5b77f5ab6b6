//! Geodesic Euler-Maruyama on S^2 with a von Mises-Fisher target, checked
//! against exact draws.
//!
//! Usage: cargo run --release --example sphere_sampling -- [chains] [delta] [kappa]

use manifold_langevin::diagnostics::reference::{sample_vmf, vmf_s2_mean_cosine};
use manifold_langevin::diagnostics::{wasserstein1, SampleCloud};
use manifold_langevin::noise::{derive_seed, keyed_rng, Stream};
use manifold_langevin::potentials::VonMisesFisher;
use manifold_langevin::samplers::{mean_stderr, run_langevin, ChainConfig, StepsizeGuard};
use manifold_langevin::Manifold;

fn main() -> manifold_langevin::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let chains: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(512);
    let delta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let kappa: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4.0);
    let mu = vec![0.0, 0.0, 1.0];
    let p = VonMisesFisher::new(kappa, mu.clone())?;
    let steps = (8.0 / delta).ceil() as usize;

    let mut finals = Vec::with_capacity(chains);
    for c in 0..chains as u64 {
        let cfg = ChainConfig {
            stepsize: delta,
            steps,
            seed: derive_seed(7, Stream::Replicate, c, 0),
            initial: vec![1.0, 0.0, 0.0],
            record_frames: false,
            guard: StepsizeGuard::Enforce,
        };
        finals.push(run_langevin(&p, &cfg)?.last().to_vec());
    }
    let cos: Vec<f64> = finals.iter().map(|x| x[2]).collect();
    let (m, se) = mean_stderr(&cos);
    println!("E<x,mu>: chains {m:.4} +- {se:.4}, exact {:.4}", vmf_s2_mean_cosine(kappa));

    let mut rng = keyed_rng(7, Stream::Reference, 0, 0);
    let exact = (0..chains).map(|_| sample_vmf(kappa, &mu, &mut rng)).collect::<manifold_langevin::Result<Vec<_>>>()?;
    let s2 = Manifold::sphere(3);
    let w = wasserstein1(&SampleCloud::new(s2, finals)?, &SampleCloud::new(s2, exact)?)?;
    println!("W1 to an exact cloud of the same size: {:.4} (K = {steps}, delta = {delta})", w.value);
    Ok(())
}
