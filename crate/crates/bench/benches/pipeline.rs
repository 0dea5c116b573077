use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use locindex::association::{
    finite_population_i, liebscher_zeta, loc_matrix, MatrixSpec, PsiFunction,
};
use locindex::bandwidth::{dpi_bandwidth, KernelConstants};
use locindex::rearrangement::loc_index;
use locindex::smoothing::fit_curve;
use locindex::{BandwidthRule, FitSpec, LossKind, StepFunction};
use locindex_bench::{mark_columns, uniform, wavy_pairs};

fn step_functions(c: &mut Criterion) {
    let mut group = c.benchmark_group("loc_index");
    for m in [100, 1000, 10_000] {
        let step = StepFunction::new(uniform(m, 1)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &step, |b, s| {
            b.iter(|| loc_index(black_box(s)))
        });
    }
    group.finish();
}

fn rank_coefficients(c: &mut Criterion) {
    let sample = wavy_pairs(1000, 2);
    c.bench_function("zeta quadratic n=1000", |b| {
        b.iter(|| liebscher_zeta(black_box(&sample), &PsiFunction::Quadratic).unwrap())
    });
    c.bench_function("finite-population I n=1000", |b| {
        b.iter(|| finite_population_i(black_box(&sample)).unwrap())
    });
}

fn bandwidth(c: &mut Criterion) {
    let kernel = KernelConstants::gaussian();
    let mut group = c.benchmark_group("dpi_bandwidth");
    for n in [52, 500, 5000] {
        let sample = wavy_pairs(n, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sample, |b, s| {
            b.iter(|| dpi_bandwidth(black_box(s), &kernel).unwrap())
        });
    }
    group.finish();
}

fn curves(c: &mut Criterion) {
    let sample = wavy_pairs(200, 4);
    let mut group = c.benchmark_group("fit_curve n=200 grid=1000");
    group.sample_size(10);
    for loss in [LossKind::Quadratic, LossKind::median()] {
        let bw = BandwidthRule::Dpi.resolve(&sample, loss).unwrap();
        let spec = FitSpec::new(loss, bw, 1000).unwrap();
        group.bench_function(loss.label(), |b| {
            b.iter(|| fit_curve(black_box(&sample), &spec).unwrap())
        });
    }
    group.finish();
}

fn matrices(c: &mut Criterion) {
    let columns = mark_columns(52, 5);
    let mut group = c.benchmark_group("loc_matrix 3 columns n=52");
    group.sample_size(10);
    for loss in [LossKind::Quadratic, LossKind::median()] {
        let spec = MatrixSpec::new(loss);
        group.bench_function(loss.label(), |b| {
            b.iter(|| loc_matrix(black_box(&columns), &spec, 1e-5, 7).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    step_functions,
    rank_coefficients,
    bandwidth,
    curves,
    matrices
);
criterion_main!(benches);
