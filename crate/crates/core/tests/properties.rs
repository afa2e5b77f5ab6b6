use manifold_langevin::diagnostics::{wasserstein1, SampleCloud};
use manifold_langevin::lemma_lab::{random_point, tangent_with_norm};
use manifold_langevin::noise::{keyed_rng, tangent_gaussian, DyadicBrownianPath, Stream};
use manifold_langevin::potentials::{Potential, StochasticGradOracle, VonMisesFisher};
use manifold_langevin::samplers::mean_stderr;
use manifold_langevin::Manifold;
use proptest::prelude::*;
use rand::Rng;

fn curved() -> impl Strategy<Value = Manifold> {
    prop_oneof![
        (3usize..6).prop_map(Manifold::sphere),
        (2usize..5).prop_map(Manifold::hyperboloid),
    ]
}

fn any_manifold() -> impl Strategy<Value = Manifold> {
    prop_oneof![curved(), (1usize..5).prop_map(Manifold::euclidean)]
}

/// Tolerance multiplier: on the hyperboloid, rounding in the ambient
/// coordinates grows with their squared size.
fn cond(m: &Manifold, pts: &[&[f64]]) -> f64 {
    match m {
        Manifold::Hyperboloid { .. } => pts.iter().map(|p| p.iter().map(|c| c * c).sum::<f64>()).fold(1.0, f64::max),
        _ => 1.0,
    }
}

fn max_len(m: &Manifold) -> f64 {
    match m {
        Manifold::Sphere { .. } => std::f64::consts::PI - 0.1,
        _ => 3.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exp_inverts_log(m in any_manifold(), seed in any::<u64>(), frac in 0.0f64..1.0) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 0);
        let x = random_point(&m, 1.0, &mut rng);
        let v = tangent_with_norm(&m, &x, frac * max_len(&m), &mut rng);
        let y = m.exp(&x, &v);
        let k = cond(&m, &[&x, &y]);
        prop_assert!(m.point_residual(&y) <= 1e-8 * k);
        let back = m.exp(&x, &m.log(&x, &y).v);
        prop_assert!(m.dist(&back, &y) <= 1e-7 * k);
    }

    #[test]
    fn geodesics_have_constant_speed(m in any_manifold(), seed in any::<u64>(), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 1);
        let x = random_point(&m, 1.0, &mut rng);
        let len = 0.5 * max_len(&m);
        let v = tangent_with_norm(&m, &x, len, &mut rng);
        let at = |t: f64| m.exp(&x, &v.iter().map(|c| t * c).collect::<Vec<_>>());
        let (a, b) = (at(t1), at(t2));
        let d = m.dist(&a, &b);
        prop_assert!((d - (t1 - t2).abs() * len).abs() <= 1e-6 * cond(&m, &[&a, &b]), "{d}");
    }

    #[test]
    fn transport_is_isometric(m in any_manifold(), seed in any::<u64>()) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 2);
        let x = random_point(&m, 1.0, &mut rng);
        let y = random_point(&m, 1.0, &mut rng);
        prop_assume!(!m.geodesic(&x, &y).nonunique());
        let u = tangent_with_norm(&m, &x, 1.3, &mut rng);
        let v = tangent_with_norm(&m, &x, 0.7, &mut rng);
        let (pu, pv) = (m.transport(&x, &y, &u), m.transport(&x, &y, &v));
        let k = cond(&m, &[&x, &y]);
        prop_assert!(m.tangent_residual(&y, &pu) <= 1e-8 * k);
        prop_assert!((m.inner(&pu, &pv) - m.inner(&u, &v)).abs() <= 1e-8 * k);
    }

    #[test]
    fn sectional_curvature_is_bounded(m in any_manifold(), seed in any::<u64>()) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 3);
        let x = random_point(&m, 1.0, &mut rng);
        let u = tangent_with_norm(&m, &x, 1.0 + 2.0 * rng.random::<f64>(), &mut rng);
        let v = tangent_with_norm(&m, &x, 1.0 + 2.0 * rng.random::<f64>(), &mut rng);
        let k = m.inner(&m.curvature_op(&x, &u, &v, &v), &u);
        let bound = m.curvature_bounds().l_r * m.inner(&u, &u) * m.inner(&v, &v);
        prop_assert!(k.abs() <= bound + 1e-12 * cond(&m, &[&x]).powi(2));
    }

    #[test]
    fn ricci_is_the_frame_trace(m in any_manifold(), seed in any::<u64>()) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 4);
        let x = random_point(&m, 1.0, &mut rng);
        let u = tangent_with_norm(&m, &x, 1.5, &mut rng);
        let frame = m.gram_schmidt_frame(&x);
        let trace: f64 = frame.vectors().map(|e| m.inner(&m.curvature_op(&x, e, &u, &u), e)).sum();
        prop_assert!((trace - m.ricci(&x, &u)).abs() <= 1e-8 * cond(&m, &[&x]));
    }

    #[test]
    fn geodesic_from_matches_exp(m in any_manifold(), seed in any::<u64>(), s in 0.0f64..1.0) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 5);
        let x = random_point(&m, 1.0, &mut rng);
        // Longer than the injectivity radius on the sphere on purpose.
        let v = tangent_with_norm(&m, &x, 4.0, &mut rng);
        let g = m.geodesic_from(&x, &v);
        let sv: Vec<f64> = v.iter().map(|c| s * c).collect();
        let p = g.point_at(s);
        let q = m.exp(&x, &sv);
        let k = cond(&m, &[&x, &p, &g.point_at(1.0)]);
        prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-10 * k));
        let w = g.transport(&v);
        prop_assert!((m.norm(&w) - m.norm(&v)).abs() <= 1e-9 * k);
    }

    #[test]
    fn dyadic_levels_telescope_in_any_order(seed in any::<u64>(), order in proptest::collection::vec(any::<u64>(), 1..40)) {
        let mut a = DyadicBrownianPath::new(2.0, 2, seed).unwrap();
        for o in &order {
            let level = 1 + (o % 6) as u32;
            let j = (o >> 8) % (1u64 << (level - 1));
            a.refine_midpoint(level, j).unwrap();
        }
        a.refine_to(6).unwrap();
        let mut b = DyadicBrownianPath::new(2.0, 2, seed).unwrap();
        b.refine_to(6).unwrap();
        for level in 0..6u32 {
            for k in 0..1u64 << level {
                let coarse = a.increment(level, k).unwrap();
                let f1 = a.increment(level + 1, 2 * k).unwrap();
                let f2 = a.increment(level + 1, 2 * k + 1).unwrap();
                for c in 0..2 {
                    prop_assert!((coarse[c] - f1[c] - f2[c]).abs() <= 1e-12);
                }
                prop_assert_eq!(coarse, b.increment(level, k).unwrap());
            }
        }
    }

    #[test]
    fn w1_is_symmetric_and_satisfies_triangle(seed in any::<u64>(), n in 1usize..12) {
        let m = Manifold::sphere(3);
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 6);
        let mut cloud = || SampleCloud::new(m, (0..n).map(|_| random_point(&m, 1.0, &mut rng)).collect()).unwrap();
        let (a, b, c) = (cloud(), cloud(), cloud());
        let ab = wasserstein1(&a, &b).unwrap().value;
        // Summation order differs between the two directions.
        prop_assert!((ab - wasserstein1(&b, &a).unwrap().value).abs() <= 1e-12);
        let ac = wasserstein1(&a, &c).unwrap().value;
        let cb = wasserstein1(&c, &b).unwrap().value;
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn vmf_drift_is_tangent(seed in any::<u64>(), kappa in 0.1f64..50.0) {
        let m = Manifold::sphere(4);
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 7);
        let mu = random_point(&m, 1.0, &mut rng);
        let p = VonMisesFisher::new(kappa, mu).unwrap();
        let x = random_point(&m, 1.0, &mut rng);
        let b = p.drift(&x);
        prop_assert!(x.iter().zip(&b).map(|(a, c)| a * c).sum::<f64>().abs() <= 1e-10);
    }

    #[test]
    fn component_drifts_average_to_the_drift(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = keyed_rng(seed, Stream::Probe, 0, 8);
        let e = Manifold::euclidean(3);
        let anchors: Vec<Vec<f64>> = (0..n).map(|_| random_point(&e, 2.0, &mut rng)).collect();
        let o = StochasticGradOracle::gaussian_anchors(1.7, &anchors).unwrap();
        let x = random_point(&e, 2.0, &mut rng);
        let full = o.sum.drift(&x);
        for (k, f) in full.iter().enumerate() {
            let avg = (0..n).map(|i| o.component_drift(i, &x)[k]).sum::<f64>() / n as f64;
            prop_assert!((avg - f).abs() <= 1e-12);
        }
    }
}

#[test]
fn tangent_gaussian_law_does_not_depend_on_the_frame() {
    let m = Manifold::sphere(4);
    let x = vec![0.5, 0.5, 0.5, 0.5];
    let f1 = m.gram_schmidt_frame(&x);
    let g = m.geodesic(&[1.0, 0.0, 0.0, 0.0], &x);
    let f2 = g.transport_frame(&m.gram_schmidt_frame(&[1.0, 0.0, 0.0, 0.0]));
    let probe = vec![0.3, -0.1, 0.2, -0.4];
    let probe = m.project_tangent(&x, &probe);
    let stats = |frame: &manifold_langevin::Frame, s: u64| {
        let mut rng = keyed_rng(s, Stream::Probe, 9, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| m.inner(&tangent_gaussian(&m, frame, &mut rng), &probe).powi(2)).collect();
        mean_stderr(&xs)
    };
    let (a, sa) = stats(&f1, 1);
    let (b, sb) = stats(&f2, 2);
    let exact = m.inner(&probe, &probe);
    assert!((a - b).abs() <= 4.0 * sa.hypot(sb), "{a} {b}");
    assert!((a - exact).abs() <= 4.0 * sa);
}
