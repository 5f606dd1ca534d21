use criterion::{criterion_group, criterion_main, Criterion};

use weylwalk::conditioned::sample_conditioned_paths;
use weylwalk::invariant::{estimate_v_stopped, Horizon, LatticeV};
use weylwalk::{RngStream, StepLaw};
use weylwalk_bench::spaced;

fn particles(c: &mut Criterion) {
    let law = StepLaw::rademacher();
    let x = spaced(2, 2.0);
    let mut g = c.benchmark_group("conditioned");
    g.sample_size(10);
    g.bench_function("smc_lattice_n100_p10k", |b| {
        b.iter(|| sample_conditioned_paths(&x, &law, 100, 10_000, &LatticeV, RngStream::new(5)).unwrap())
    });
    let x = spaced(3, 2.0);
    let gauss = StepLaw::gaussian();
    g.bench_function("v_stopped_k3_1k", |b| {
        b.iter(|| estimate_v_stopped(&x, &gauss, Horizon::Fixed(1000), 1000, RngStream::new(6)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, particles);
criterion_main!(benches);
