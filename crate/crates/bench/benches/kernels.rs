use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_rasch::{fisher_summary, fit_mle, gradient, sample_design, SolverConfig};
use sparse_rasch_bench::instance;

fn bench_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    for n in [200usize, 1000] {
        let inst = instance(n, 0.1, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| gradient(&inst.design, &inst.outcomes, black_box(inst.truth.as_slice())).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_mle");
    group.sample_size(10);
    for n in [200usize, 800] {
        let inst = instance(n, 0.2, 2);
        let config = SolverConfig::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| fit_mle(&inst.design, &inst.outcomes, &config).unwrap())
        });
    }
    group.finish();
}

fn bench_fisher(c: &mut Criterion) {
    let inst = instance(1000, 0.1, 3);
    c.bench_function("fisher_summary/1000", |b| {
        b.iter(|| fisher_summary(&inst.design, black_box(&inst.truth)).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_design");
    for n in [1000usize, 4000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| sample_design(n, n, 0.05, black_box(7)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_gradient, bench_fit, bench_fisher, bench_sampling);
criterion_main!(benches);
