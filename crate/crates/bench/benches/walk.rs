use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use weylwalk::walk::{simulate_until, survival_prob_direct, survival_prob_splitting, SplittingConfig};
use weylwalk::{RngStream, StepLaw};
use weylwalk_bench::spaced;

fn paths(c: &mut Criterion) {
    let law = StepLaw::gaussian();
    let mut g = c.benchmark_group("simulate_until");
    for k in [2, 3, 5, 8] {
        let x = spaced(k, 2.0);
        g.throughput(Throughput::Elements(1));
        g.bench_with_input(BenchmarkId::from_parameter(k), &x, |b, x| {
            let mut i = 0u32;
            b.iter(|| {
                i = i.wrapping_add(1);
                simulate_until(x, &law, 1024, 0.1, RngStream::new(1).child(0, i)).unwrap()
            })
        });
    }
    g.finish();
}

fn survival(c: &mut Criterion) {
    let law = StepLaw::gaussian();
    let x = spaced(3, 2.0);
    let mut g = c.benchmark_group("survival_k3_n256");
    g.sample_size(10);
    g.bench_function("direct_10k", |b| {
        b.iter(|| survival_prob_direct(&x, &law, 256, 10_000, RngStream::new(2)).unwrap())
    });
    let cfg = SplittingConfig {
        level_times: vec![16, 32, 64, 128, 256],
        particles_per_level: 2000,
        replicates: 1,
    };
    g.bench_function("splitting_2k", |b| {
        b.iter(|| survival_prob_splitting(&x, &law, 256, &cfg, RngStream::new(3)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, paths, survival);
criterion_main!(benches);
