use std::collections::BTreeMap;
use std::io::Read;

use flate2::read::GzDecoder;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use weylwalk::conditioned::{
    exact_htransform_marginal_k2, exact_htransform_step_k2, htransform_k2_transitions,
    sample_conditioned_on_survival, sample_conditioned_paths, sample_conditioned_paths_observed,
    PathDumpWriter,
};
use weylwalk::invariant::{LatticeV, VandermondeH};
use weylwalk::stats::effective_sample_size;
use weylwalk::walk::lattice::exact_conditioned_gap_law_k2;
use weylwalk::{in_weyl, Error, Estimate, RngStream, StepLaw, WeylPoint};

fn point(v: &[f64]) -> WeylPoint {
    WeylPoint::new(v.to_vec()).unwrap()
}

fn tv(a: &BTreeMap<i64, f64>, b: &BTreeMap<i64, f64>) -> f64 {
    let keys: std::collections::BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
    keys.iter()
        .map(|g| (a.get(g).unwrap_or(&0.0) - b.get(g).unwrap_or(&0.0)).abs())
        .sum::<f64>()
        / 2.0
}

#[test]
fn exact_transitions_are_stochastic() {
    for g in 1..40 {
        let s: f64 = htransform_k2_transitions(g).unwrap().iter().map(|(_, p)| p).sum();
        assert!((s - 1.0).abs() < 1e-15, "gap {g}: {s}");
    }
    assert_eq!(htransform_k2_transitions(2).unwrap(), vec![(2, 0.5), (4, 0.5)]);
}

#[test]
fn exact_chain_never_leaves() {
    let mut rng = RngStream::new(1).rng();
    let mut g = 2;
    let mut up_from_two = (0u64, 0u64);
    for _ in 0..1_000_000 {
        let next = exact_htransform_step_k2(g, &mut rng).unwrap();
        assert!(next > 0);
        if g == 2 {
            up_from_two.1 += 1;
            if next == 4 {
                up_from_two.0 += 1;
            }
        }
        g = next;
    }
    assert!(up_from_two.1 > 0);
}

#[test]
fn particle_sampler_matches_exact_chain() {
    let n = 10;
    let ens = sample_conditioned_paths(&point(&[0.0, 2.0]), &StepLaw::rademacher(), n, 100_000, &LatticeV, RngStream::new(2))
        .unwrap();
    let w = ens.normalized_weights();
    let mut got: BTreeMap<i64, f64> = BTreeMap::new();
    for i in 0..ens.len() {
        let p = ens.position(i);
        *got.entry((p[1] - p[0]).round() as i64).or_insert(0.0) += w[i];
    }
    let want = exact_htransform_marginal_k2(2, n).unwrap();
    // one-sample chi-square on the weighted counts scaled to the Kish size,
    // pooling cells with small expectation into the last one
    let n_eff = effective_sample_size(&ens.weights);
    let (mut stat, mut cells, mut pool_o, mut pool_e) = (0.0, 0usize, 0.0, 0.0);
    for (g, p) in &want {
        let o = got.get(g).copied().unwrap_or(0.0);
        if p * n_eff >= 5.0 {
            stat += n_eff * (o - p).powi(2) / p;
            cells += 1;
        } else {
            pool_o += o;
            pool_e += p;
        }
    }
    if pool_e > 0.0 {
        stat += n_eff * (pool_o - pool_e).powi(2) / pool_e;
        cells += 1;
    }
    let p_value = ChiSquared::new((cells - 1) as f64).unwrap().sf(stat);
    assert!(p_value > 0.001, "chi2 {stat} on {} dof, p = {p_value}", cells - 1);
}

#[test]
fn zero_steps_returns_start() {
    let x = point(&[0.0, 1.0, 3.0]);
    let ens = sample_conditioned_paths(&x, &StepLaw::gaussian(), 0, 50, &VandermondeH, RngStream::new(3)).unwrap();
    assert_eq!(ens.len(), 50);
    for i in 0..50 {
        assert_eq!(ens.position(i), x.coords());
    }
    assert!(ens.normalized_weights().iter().all(|&w| (w - 0.02).abs() < 1e-15));
}

#[test]
fn particles_stay_in_chamber() {
    let x = point(&[0.0, 1.0, 2.0, 3.0]);
    let mut resampled = false;
    let ens = sample_conditioned_paths_observed(&x, &StepLaw::laplace(), 200, 2000, &VandermondeH, RngStream::new(4), |e| {
        for i in 0..e.len() {
            assert!(in_weyl(e.position(i)));
        }
        resampled |= e.resample_count > 0;
        Ok(())
    })
    .unwrap();
    assert_eq!(ens.step_index, 200);
    assert!(resampled);
}

#[test]
fn survival_conditioning_moves_toward_transform() {
    // P(gap_1 = 4 | tau > m) rises from 1/3 toward the transform value 1/2
    let probs: Vec<f64> = [1, 5, 20, 100, 400]
        .iter()
        .map(|&m| exact_conditioned_gap_law_k2(2, 1, m).unwrap()[&4])
        .collect();
    assert!((probs[0] - 1.0 / 3.0).abs() < 1e-15);
    assert!(probs.windows(2).all(|w| w[1] > w[0]), "{probs:?}");
    assert!(probs.iter().all(|&p| p < 0.5));

    let law = StepLaw::rademacher();
    for (m, want) in [(1, probs[0]), (20, probs[2])] {
        let r = sample_conditioned_on_survival(&point(&[0.0, 2.0]), &law, 1, m, 100_000, RngStream::new(5)).unwrap();
        let ind: Vec<f64> = r
            .points
            .iter()
            .map(|p| if p[1] - p[0] == 4.0 { 1.0 } else { 0.0 })
            .collect();
        let e = Estimate::from_samples(&ind);
        assert!(e.within(want, 3.0), "m = {m}: {e:?} vs {want}");
    }
}

#[test]
fn distance_to_transform_shrinks_with_m() {
    let target = exact_htransform_marginal_k2(2, 4).unwrap();
    let d: Vec<f64> = [4, 8, 16, 64, 256]
        .iter()
        .map(|&m| tv(&exact_conditioned_gap_law_k2(2, 4, m).unwrap(), &target))
        .collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
}

#[test]
fn hopeless_rejection_reports_low_acceptance() {
    let x = point(&[0.0, 0.05, 0.1, 0.15]);
    let err = sample_conditioned_on_survival(&x, &StepLaw::gaussian(), 200, 200, 10, RngStream::new(6)).unwrap_err();
    assert!(matches!(err, Error::AcceptanceTooLow { .. }), "{err}");
}

#[test]
fn path_dump_has_stable_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("paths.csv.gz");
    let mut w = PathDumpWriter::create(&path).unwrap();
    sample_conditioned_paths_observed(&point(&[0.0, 1.0]), &StepLaw::gaussian(), 3, 5, &VandermondeH, RngStream::new(7), |e| {
        w.write_ensemble(e)
    })
    .unwrap();
    w.finish().unwrap();
    let mut text = String::new();
    GzDecoder::new(std::fs::File::open(&path).unwrap()).read_to_string(&mut text).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "particle,step,weight,h_ratio,coords");
    assert_eq!(lines.len(), 1 + 4 * 5);
    assert!(lines[1].starts_with("0,0,"));
}
