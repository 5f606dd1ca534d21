//! The experiment recipes behind each subcommand.

use std::f64::consts::PI;

use serde_json::json;

use weylwalk::conditioned::sample_conditioned_paths;
use weylwalk::dyson::{
    bm_survival_closed_k2, bm_survival_km, closed_integral, constant_k, constant_kappa,
    dyson_endpoints, mu_normalizer, DysonConfig, DysonStart, KmBudget,
};
use weylwalk::invariant::{
    check_v_properties, estimate_v_stopped, GapGrid, Horizon, PropertyConfig, PropertyGrid, VTable,
};
use weylwalk::stats::{
    conjectured_exponent, fit_tail_exponent, gof_against_law, replicate_slope_stderr, GofOptions,
    ReferenceLaw, TailFit,
};
use weylwalk::walk::lattice::exact_survival_k2;
use weylwalk::walk::{
    simulate_until, survival_prob_splitting, SplittingConfig, SplittingResult, StepKind,
};
use weylwalk::{Estimate, RngStream, StepLaw, WeylPoint};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::{coords, num, Manifest};
use crate::CliError;

/// What a finished experiment found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Degenerate,
}

#[derive(Default)]
struct Tally {
    failed: bool,
    degenerate: bool,
}

impl Tally {
    fn check(&mut self, man: &mut Manifest, name: &str, passed: bool, detail: serde_json::Value) -> Result<(), CliError> {
        self.failed |= !passed;
        man.check(name, passed, detail)
    }

    fn verdict(&self) -> Verdict {
        if self.degenerate {
            Verdict::Degenerate
        } else if self.failed {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }
}

pub fn run_kind(cfg: &ExperimentConfig, man: &mut Manifest) -> Result<Verdict, CliError> {
    match cfg.kind {
        ExperimentKind::Tail => tail(cfg, man, false),
        ExperimentKind::HeavyTail => tail(cfg, man, true),
        ExperimentKind::VProperties => v_properties(cfg, man),
        ExperimentKind::LimitDist => limit_dist(cfg, man),
        ExperimentKind::DysonCompare => dyson_compare(cfg, man),
    }
}

fn light_exponent(k: usize) -> f64 {
    (k * (k - 1)) as f64 / 4.0
}

/// Dyadic levels up to the largest horizon, merged with the horizons.
fn level_times(horizons: &[u64]) -> Vec<u64> {
    let max = *horizons.last().unwrap();
    let mut t: Vec<u64> = (0..64).map(|e| 1u64 << e).take_while(|&v| v < max).collect();
    t.extend_from_slice(horizons);
    t.sort_unstable();
    t.dedup();
    t
}

fn splitting(cfg: &ExperimentConfig, x: &WeylPoint, law: &StepLaw, rng: RngStream) -> Result<(SplittingConfig, SplittingResult), CliError> {
    let sc = SplittingConfig {
        level_times: level_times(&cfg.horizons),
        particles_per_level: cfg.particles,
        replicates: cfg.replicates,
    };
    let res = survival_prob_splitting(x, law, cfg.max_horizon(), &sc, rng)?;
    Ok((sc, res))
}

fn fit_row(fit: &TailFit, level: f64) -> Vec<String> {
    let (lo, hi) = fit.exponent_ci(level);
    vec![
        num(fit.slope),
        num(fit.intercept),
        num(fit.stderr_slope),
        num(fit.r_squared),
        fit.points_used.len().to_string(),
        num(lo),
        num(hi),
    ]
}

const FIT_HEADER: [&str; 7] = [
    "slope", "intercept", "stderr_slope", "r_squared", "points", "exponent_ci_lo", "exponent_ci_hi",
];

fn tail(cfg: &ExperimentConfig, man: &mut Manifest, heavy: bool) -> Result<Verdict, CliError> {
    let law = cfg.step_law()?;
    let x = cfg.start_point()?;
    let k = cfg.k;
    let rng = RngStream::new(cfg.seed);
    let mut tally = Tally::default();
    let exponent = light_exponent(k);

    let (sc, res) = splitting(cfg, &x, &law, rng.namespace(0))?;
    if res.degenerate {
        tally.degenerate = true;
        man.event("warning", json!({ "message": format!("{} replicates lost every particle", res.degenerate_replicates) }))?;
    }
    let rows: Vec<Vec<String>> = res
        .profile
        .iter()
        .map(|(n, e)| {
            vec![
                n.to_string(),
                num(e.value),
                num(e.stderr),
                num(e.value * (*n as f64).powf(exponent)),
                cfg.horizons.contains(n).to_string(),
            ]
        })
        .collect();
    man.table("tail.csv", &["n", "p_hat", "stderr", "p_hat_scaled", "fitted"], &rows)?;

    let pts: Vec<(u64, Estimate)> = res
        .profile
        .iter()
        .filter(|(n, _)| cfg.horizons.contains(n))
        .copied()
        .collect();

    // exact checkpoints for two Rademacher walks at an integer gap
    let gap = x[1] - x[0];
    if k == 2 && law.kind() == StepKind::Rademacher && gap.fract() == 0.0 {
        let mut rows = Vec::new();
        for (n, e) in &pts {
            let exact = exact_survival_k2(gap as i64, *n)?;
            let ok = if e.stderr > 0.0 { e.within(exact, 3.0) } else { e.value == exact };
            rows.push(vec![n.to_string(), num(exact), num(e.value), num(e.stderr)]);
            man.event("checkpoint", json!({ "n": n, "exact": exact, "estimate": e.value, "stderr": e.stderr }))?;
            tally.check(man, &format!("exact_checkpoint_n{n}"), ok, json!({ "z": e.z_score(exact) }))?;
        }
        man.table("exact.csv", &["n", "exact", "p_hat", "stderr"], &rows)?;
    }

    let fit = if pts.len() >= weylwalk::stats::tail::MIN_POINTS {
        Some(fit_tail_exponent(&pts)?)
    } else {
        man.event("note", json!({ "message": "fewer than four horizons; no tail fit" }))?;
        None
    };

    if let Some(fit) = fit {
        let replicate_se = replicate_slope_stderr(&sc.level_times, &res.replicate_profiles, cfg.horizons[0]);
        let fit = match replicate_se {
            Some(se) => fit.with_min_stderr(se),
            None => fit,
        };
        man.table("fit.csv", &FIT_HEADER, &[fit_row(&fit, 0.95)])?;
        let (lo, hi) = fit.exponent_ci(0.95);
        if heavy {
            let conj = match law.kind() {
                StepKind::SymmetrizedPareto { alpha } if k >= 2 => conjectured_exponent(k, 1, alpha).ok(),
                _ => None,
            };
            tally.check(
                man,
                "exponent_below_light_tail",
                hi < exponent,
                json!({ "exponent": fit.exponent(), "ci95": [lo, hi], "light_tail": exponent, "conjectured": conj }),
            )?;
        } else {
            tally.check(
                man,
                "slope",
                (fit.slope + exponent).abs() <= 0.15 && fit.r_squared >= 0.99,
                json!({ "slope": fit.slope, "target": -exponent, "r_squared": fit.r_squared, "ci95": [lo, hi] }),
            )?;
            let v = estimate_v_stopped(&x, &law, Horizon::Fixed(cfg.v_horizon), cfg.samples, rng.namespace(1))?;
            let kappa = constant_kappa(k)?;
            man.event("v_hat", json!({ "value": v.value(), "stderr": v.stderr(), "censored": v.censored_fraction }))?;
            for (n, e) in pts.iter().rev().take(2) {
                let ratio = e.value * (*n as f64).powf(exponent) / v.value() / kappa;
                tally.check(man, &format!("constant_n{n}"), (0.85..=1.15).contains(&ratio), json!({ "ratio_to_kappa": ratio }))?;
            }
        }
    }

    // how many paths reach the well-separated region before leaving
    let horizon = cfg.max_horizon();
    let paths = cfg.samples.min(10_000) as u32;
    let diag = rng.namespace(2);
    let mut entered = 0u64;
    let mut sign_later = 0u64;
    for i in 0..paths {
        let r = simulate_until(&x, &law, horizon, cfg.eps, diag.child(0, i))?;
        if r.nu.le(r.tau) && !r.nu.is_censored() {
            entered += 1;
        }
        if r.tau != r.t_sign {
            sign_later += 1;
        }
    }
    man.event(
        "diagnostics",
        json!({ "paths": paths, "entered_separated_before_exit": entered, "sign_change_after_exit": sign_later }),
    )?;
    Ok(tally.verdict())
}

fn v_properties(cfg: &ExperimentConfig, man: &mut Manifest) -> Result<Verdict, CliError> {
    let law = cfg.step_law()?;
    let grid = PropertyGrid::standard(cfg.k).map_err(|e| CliError::Usage(e.to_string()))?;
    let pc = PropertyConfig {
        samples: cfg.samples,
        horizon: Horizon::Fixed(cfg.v_horizon),
        wide_samples: cfg.samples,
        wide_horizon: Horizon::Fixed(cfg.max_horizon()),
        ..PropertyConfig::default()
    };
    let rep = check_v_properties(&law, &grid, &pc, RngStream::new(cfg.seed))?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                r.property.to_string(),
                r.passed.to_string(),
                r.checks.to_string(),
                num(r.worst_margin),
                r.detail.clone(),
            ]
        })
        .collect();
    man.table("v_props.csv", &["property", "passed", "checks", "worst_margin", "detail"], &rows)?;
    let rows: Vec<Vec<String>> = rep
        .estimates
        .iter()
        .map(|(x, v)| vec![coords(&x.gaps()), num(v.value()), num(v.stderr()), num(v.censored_fraction)])
        .collect();
    man.table("v_estimates.csv", &["gaps", "v_hat", "stderr", "censored"], &rows)?;
    let mut tally = Tally::default();
    for r in &rep.rows {
        tally.check(man, r.property, r.passed, json!({ "worst_margin": r.worst_margin, "detail": r.detail }))?;
    }
    Ok(tally.verdict())
}

fn limit_dist(cfg: &ExperimentConfig, man: &mut Manifest) -> Result<Verdict, CliError> {
    let law = cfg.step_law()?;
    let x = cfg.start_point()?;
    let k = cfg.k;
    let n = cfg.max_horizon();
    let rng = RngStream::new(cfg.seed);
    let axis = vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
    let grid = GapGrid::uniform(k, axis)?;
    let table = VTable::build(grid, &law, Horizon::Fixed(cfg.v_horizon), cfg.samples, rng.namespace(0))?
        .with_fallback_gap(64.0);
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    std::fs::write(man.dir().join("v_table.csv"), &buf)?;
    man.event("artifact", json!({ "file": "v_table.csv", "rows": table.entries().len() }))?;

    let scale = (n as f64).sqrt();
    let reps = u16::try_from(cfg.replicates).map_err(|_| CliError::Usage("too many replicates".into()))?;
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    let mut gap_means = Vec::new();
    let mut rows = Vec::new();
    let mut survival = Vec::new();
    for r in 0..reps {
        let ens = sample_conditioned_paths(&x, &law, n, cfg.particles, &table, rng.namespace(1 + r))?;
        let w = ens.survival_reweighted();
        survival.push(ens.survival_estimate());
        let mut mean = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let p: Vec<f64> = ens.position(i).iter().map(|v| v / scale).collect();
            mean += wi * (p[1] - p[0]);
            rows.push(vec![r.to_string(), num(*wi), coords(&p)]);
            pts.push(p);
            ws.push(wi / f64::from(reps));
        }
        gap_means.push(mean);
    }
    man.table("endpoints.csv", &["replicate", "weight", "coords"], &rows)?;
    let surv = Estimate::from_samples(&survival);
    man.event("survival", json!({ "n": n, "estimate": surv.value, "stderr": surv.stderr }))?;

    let mut tally = Tally::default();
    let rep = gof_against_law(&pts, Some(&ws), k, ReferenceLaw::Mu, GofOptions::default())?;
    tally.check(
        man,
        "gof_mu",
        rep.p_value > 0.01,
        json!({ "test": format!("{:?}", rep.test), "statistic": rep.statistic, "p_value": rep.p_value, "dof": rep.dof, "n_eff": rep.n_eff }),
    )?;
    if k == 2 && gap_means.len() >= 2 {
        let m = Estimate::from_samples(&gap_means);
        let z = m.z_score(PI.sqrt());
        tally.check(man, "gap_mean", z.abs() < 3.0, json!({ "mean": m.value, "stderr": m.stderr, "z": z }))?;
    }
    Ok(tally.verdict())
}

fn dyson_compare(cfg: &ExperimentConfig, man: &mut Manifest) -> Result<Verdict, CliError> {
    let x = cfg.start_point()?;
    let k = cfg.k;
    let t = 1.0;
    let paths = usize::try_from(cfg.samples).map_err(|_| CliError::Usage("samples too large".into()))?;
    let rng = RngStream::new(cfg.seed);
    let dc = DysonConfig::default();
    let mut tally = Tally::default();
    let mut rows = Vec::new();
    for (label, start, ns) in [("origin", DysonStart::Origin { k }, 0u16), ("start", DysonStart::Point(x.clone()), 1)] {
        let batch = dyson_endpoints(&start, t, &dc, paths, rng.namespace(ns))?;
        if batch.endpoints.is_empty() {
            tally.degenerate = true;
            continue;
        }
        for p in &batch.endpoints {
            rows.push(vec![label.to_string(), coords(p)]);
        }
        let rep = gof_against_law(&batch.endpoints, None, k, ReferenceLaw::Gue, GofOptions::default())?;
        tally.check(
            man,
            &format!("gue_{label}"),
            rep.p_value > 0.01,
            json!({ "statistic": rep.statistic, "p_value": rep.p_value, "discarded": batch.discarded }),
        )?;
        // the Dyson law is not mu; report the distance for contrast
        let mu = gof_against_law(&batch.endpoints, None, k, ReferenceLaw::Mu, GofOptions::default())?;
        man.event("contrast", json!({ "source": label, "reference": "mu", "p_value": mu.p_value }))?;
    }
    man.table("dyson.csv", &["source", "coords"], &rows)?;
    if k == 2 {
        let g = x[1] - x[0];
        let km = bm_survival_km(&x, t, KmBudget::default())?;
        let closed = bm_survival_closed_k2(g, t)?;
        tally.check(man, "km_reflection", (km.value - closed).abs() <= 1e-8, json!({ "km": km.value, "closed": closed }))?;
    }
    Ok(tally.verdict())
}

/// Constants for `k = 2..=8` into `constants.csv`.
pub fn constants(man: &mut Manifest) -> Result<Verdict, CliError> {
    let mut rows = Vec::new();
    for k in 2..=8 {
        rows.push(vec![
            k.to_string(),
            num(constant_k(k)?),
            num(mu_normalizer(k)?),
            num(constant_kappa(k)?),
            num(closed_integral(k)?),
            num(light_exponent(k)),
        ]);
    }
    man.table("constants.csv", &["k", "K", "Z", "kappa", "gaussian_integral", "exponent"], &rows)?;
    let mut tally = Tally::default();
    let e2 = (constant_kappa(2)? - 1.0 / PI.sqrt()).abs();
    let e3 = (constant_kappa(3)? - 1.0 / (4.0 * PI.sqrt())).abs();
    tally.check(man, "kappa_closed_forms", e2 <= 1e-12 && e3 <= 1e-12, json!({ "err_k2": e2, "err_k3": e3 }))?;
    Ok(tally.verdict())
}
