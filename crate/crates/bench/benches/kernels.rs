//! Benchmarks for the hot kernels: functional evaluation, record
//! extraction, and the maxent solve. Run with `cargo bench -p decohist-bench`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use decohist_core::{
    build_constraints, classicality_report, decoherence_matrix, environment_model,
    extract_records_impure, implication_chain_report, maxent, measurement_model, random_model,
    C64, SolverOptions,
};

fn bench_decoherence_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("decoherence_matrix");
    for dim in [4usize, 8, 16] {
        let bundle = random_model(3, dim, 2).unwrap();
        group.bench_with_input(BenchmarkId::new("random", dim), &bundle, |b, bu| {
            b.iter(|| decoherence_matrix(&bu.set).unwrap());
        });
    }
    group.sample_size(20);
    for n_env in [4usize, 6, 8] {
        let bundle = environment_model(n_env, std::f64::consts::FRAC_PI_4).unwrap();
        let dim = bundle.set.dim();
        group.bench_with_input(
            BenchmarkId::new("environment", dim),
            &bundle,
            |b, bu| {
                b.iter(|| decoherence_matrix(&bu.set).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_records(c: &mut Criterion) {
    let mut group = c.benchmark_group("records");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let measurement = measurement_model(C64::new(s, 0.0), C64::new(s, 0.0)).unwrap();
    group.bench_function("extract_measurement", |b| {
        b.iter(|| extract_records_impure(&measurement.set).unwrap());
    });
    for dim in [8usize, 16] {
        let bundle = random_model(11, dim, 2).unwrap();
        group.bench_with_input(
            BenchmarkId::new("implication_chain", dim),
            &bundle,
            |b, bu| {
                b.iter(|| implication_chain_report(&bu.set, None).unwrap());
            },
        );
    }
    group.finish();
}

fn bench_maxent(c: &mut Criterion) {
    let mut group = c.benchmark_group("maxent");
    group.sample_size(20);
    let opts = SolverOptions::default();
    for dim in [4usize, 8, 12] {
        let bundle = random_model(5, dim, 2).unwrap();
        let cs = build_constraints(&bundle.set).unwrap();
        group.bench_with_input(
            BenchmarkId::new("solve", format!("{dim}x{}", cs.len())),
            &cs,
            |b, cs| {
                b.iter(|| maxent(cs, &opts).unwrap());
            },
        );
    }
    let bundle = random_model(5, 8, 2).unwrap();
    group.bench_function("full_report", |b| {
        b.iter(|| classicality_report(&bundle.set, &opts).unwrap());
    });
    group.finish();
}

criterion_group!(
    kernels,
    bench_decoherence_matrix,
    bench_records,
    bench_maxent
);
criterion_main!(kernels);
