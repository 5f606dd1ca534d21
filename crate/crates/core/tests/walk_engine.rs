use proptest::prelude::*;
use statrs::function::erf::erf;

use weylwalk::stats::fit_tail_exponent;
use weylwalk::walk::lattice::exact_survival_k2;
use weylwalk::walk::{
    simulate_until, simulate_with, survival_prob_direct, survival_prob_splitting,
    survival_profile_direct, ScriptedSteps, SplittingConfig, Stop,
};
use weylwalk::{Estimate, RngStream, StepLaw, WeylPoint};

fn point(v: &[f64]) -> WeylPoint {
    WeylPoint::new(v.to_vec()).unwrap()
}

#[test]
fn pareto_tail_matches_closed_form() {
    let law = StepLaw::symmetrized_pareto(2.5).unwrap();
    let mut rng = RngStream::new(1).rng();
    let n = 1_000_000u64;
    let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng).abs()).collect();
    for u in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
        let hits = draws.iter().filter(|&&d| d > u).count() as u64;
        let e = Estimate::bernoulli(hits, n);
        assert!(e.within(law.abs_tail(u), 3.0), "u = {u}: {e:?} vs {}", law.abs_tail(u));
    }
    // far out, the exact tail decays like u^-alpha
    let pts: Vec<(u64, Estimate)> = (0..5)
        .map(|i| {
            let u = 1e4 * 2f64.powi(i);
            (u as u64, Estimate::exact(law.abs_tail(u)))
        })
        .collect();
    let fit = fit_tail_exponent(&pts).unwrap();
    assert!((fit.slope + 2.5).abs() < 0.01, "{}", fit.slope);
}

#[test]
fn exit_precedes_sign_change() {
    for (law, x) in [
        (StepLaw::gaussian(), point(&[0.0, 1.0, 2.0])),
        (StepLaw::symmetrized_pareto(2.5).unwrap(), point(&[0.0, 2.0, 4.0, 6.0])),
        (StepLaw::rademacher(), point(&[0.0, 2.0, 4.0])),
    ] {
        let rng = RngStream::new(2);
        for i in 0..5000 {
            let r = simulate_until(&x, &law, 500, 0.1, rng.child(0, i)).unwrap();
            assert!(r.tau.le(r.t_sign), "{law}: {:?} > {:?}", r.tau, r.t_sign);
            assert!(r.m_max >= 0.0);
        }
    }
}

#[test]
fn wider_start_survives_longer_under_coupling() {
    let law = StepLaw::gaussian();
    let rng = RngStream::new(3);
    for i in 0..2000 {
        let s = rng.child(0, i);
        let a = simulate_until(&point(&[0.0, 1.0]), &law, 2000, 0.1, s).unwrap();
        let b = simulate_until(&point(&[0.0, 2.5]), &law, 2000, 0.1, s).unwrap();
        assert!(a.tau.le(b.tau), "path {i}: {:?} vs {:?}", a.tau, b.tau);
    }
}

#[test]
fn profile_is_non_increasing() {
    let horizons = [1, 2, 4, 8, 16, 32, 64];
    let p = survival_profile_direct(&point(&[0.0, 1.0, 2.0]), &StepLaw::laplace(), &horizons, 20_000, RngStream::new(4))
        .unwrap();
    assert!(p.windows(2).all(|w| w[1].value <= w[0].value));
}

#[test]
fn lattice_fixtures_by_simulation() {
    let law = StepLaw::rademacher();
    let x = point(&[0.0, 2.0]);
    assert_eq!(exact_survival_k2(2, 1).unwrap(), 0.75);
    assert_eq!(exact_survival_k2(2, 2).unwrap(), 0.625);
    for (n, want) in [(1, 0.75), (2, 0.625), (10, exact_survival_k2(2, 10).unwrap())] {
        let e = survival_prob_direct(&x, &law, n, 100_000, RngStream::new(5)).unwrap();
        assert!(e.within(want, 3.0), "n = {n}: {e:?} vs {want}");
    }
}

#[test]
fn gap_walk_near_reflection_formula() {
    // two Gaussian walks: the gap has variance 2 per step
    let law = StepLaw::gaussian();
    for (g, n) in [(30.0, 400), (40.0, 900)] {
        let e = survival_prob_direct(&point(&[0.0, g]), &law, n, 20_000, RngStream::new(6)).unwrap();
        let approx = erf(g / (2.0 * (n as f64).sqrt()));
        assert!((e.value / approx - 1.0).abs() < 0.05, "g = {g}, n = {n}: {} vs {approx}", e.value);
    }
}

#[test]
fn single_level_splitting_is_direct() {
    let x = point(&[0.0, 1.0, 2.0]);
    let law = StepLaw::gaussian();
    let cfg = SplittingConfig {
        level_times: vec![16],
        particles_per_level: 5000,
        replicates: 1,
    };
    let s = survival_prob_splitting(&x, &law, 16, &cfg, RngStream::new(7)).unwrap();
    let d = survival_prob_direct(&x, &law, 16, 5000, RngStream::new(7)).unwrap();
    assert_eq!(s.estimate.value, d.value);
}

#[test]
fn splitting_agrees_with_direct() {
    let x = point(&[0.0, 1.0, 2.0]);
    let law = StepLaw::gaussian();
    let n = 64;
    let d = survival_prob_direct(&x, &law, n, 200_000, RngStream::new(8)).unwrap();
    let s = survival_prob_splitting(&x, &law, n, &SplittingConfig::dyadic(n, 4096, 8), RngStream::new(9)).unwrap();
    assert!(!s.degenerate);
    let diff = d.minus(&s.estimate);
    assert!(diff.value.abs() <= 3.0 * diff.stderr, "{d:?} vs {:?}", s.estimate);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let x = point(&[0.0, 1.0, 2.0]);
    let law = StepLaw::student_t(3.0).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| survival_prob_direct(&x, &law, 50, 30_000, RngStream::new(10)).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
}

proptest! {
    #[test]
    fn scripted_paths_order_stopping_times(
        gaps in prop::collection::vec(0.1f64..3.0, 1..4),
        steps in prop::collection::vec(-2.0f64..2.0, 40),
    ) {
        let x = WeylPoint::from_gaps(0.0, &gaps).unwrap();
        let k = x.k();
        let per: Vec<Vec<f64>> = (0..k)
            .map(|j| (0..10).map(|n| steps[(n * k + j) % steps.len()]).collect())
            .collect();
        let mut src = ScriptedSteps::from_coordinate_sequences(&per).unwrap();
        let r = simulate_with(&x, 10, 0.1, &mut src).unwrap();
        prop_assert!(r.tau.le(r.t_sign));
        if let Stop::At(t) = r.tau {
            prop_assert!((1..=10).contains(&t));
        }
    }
}
