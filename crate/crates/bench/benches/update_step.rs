use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pyramidnet_core::baselines::SvbConfig;
use pyramidnet_core::scaling::{PyramidStep, SvbStep};

const SIZES: [usize; 4] = [32, 64, 128, 256];

fn update_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("update_step");
    group.sample_size(10);
    let svb = SvbConfig::new(0.05).unwrap();
    for n in SIZES {
        let mut pyramid = PyramidStep::new(n, 0.01, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("pyramid", n), &n, |b, _| b.iter(|| pyramid.step().unwrap()));
        let mut dense = SvbStep::new(n, 0.01, svb, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("svb", n), &n, |b, _| b.iter(|| dense.step().unwrap()));
    }
    group.finish();
}

criterion_group!(benches, update_step);
criterion_main!(benches);
