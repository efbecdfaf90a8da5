//! Monte Carlo throughput: trials on the calling thread vs the rayon pool.

use clup_core::harness::{run_experiment, Execution, ExperimentSpec};
use clup_core::Variant;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn spec(n: usize) -> ExperimentSpec {
    ExperimentSpec {
        n,
        snr_db: vec![13.0],
        variants: vec![Variant::PolytopeStart, Variant::RandomStart],
        trials: 8,
        max_iters: 3,
        ..ExperimentSpec::default()
    }
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    for n in [64, 200] {
        let spec = spec(n);
        group.bench_with_input(BenchmarkId::new("sequential", n), &spec, |b, spec| {
            b.iter(|| run_experiment(spec, Execution::Sequential).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", n), &spec, |b, spec| {
            b.iter(|| run_experiment(spec, Execution::Parallel { workers: None }).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, trials);
criterion_main!(benches);
