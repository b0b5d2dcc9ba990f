//! Hot-path benchmarks: orbit sampling, scaled determinant and transfer
//! recursions, spectrum bisection, Green's function routes, and the IDS
//! table builder. Run with `cargo bench -p qplab-bench`.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qplab_core::arithmetic::ContinuedFraction;
use qplab_core::cocycle::{det_sequence, transfer_matrix};
use qplab_core::ids::{ids_estimate, IdsGrid};
use qplab_core::localization::GreenBox;
use qplab_core::potential::MonotonePotential;
use qplab_core::spectral::spectrum_of_diag;
use qplab_core::{BoundaryCondition, OperatorSpec};

fn golden_sawtooth(lambda: f64) -> OperatorSpec {
    let cf = ContinuedFraction::golden(30).unwrap();
    OperatorSpec::new(cf, lambda, MonotonePotential::sawtooth(), 0.0).unwrap()
}

fn bench_orbit(c: &mut Criterion) {
    let spec = golden_sawtooth(10.0);
    c.bench_function("orbit_sample_10k", |b| {
        b.iter(|| black_box(spec.sample_orbit(black_box(10_000), false)))
    });
}

fn bench_transfer(c: &mut Criterion) {
    let spec = golden_sawtooth(10.0);
    let diag = spec.sample_orbit(10_000, false);
    c.bench_function("transfer_matrix_10k", |b| {
        b.iter(|| black_box(transfer_matrix(black_box(&diag), black_box(4.8))))
    });
}

fn bench_det_sequence(c: &mut Criterion) {
    let spec = golden_sawtooth(10.0);
    let diag = spec.sample_orbit(1_000, false);
    c.bench_function("det_sequence_1k", |b| {
        b.iter(|| black_box(det_sequence(black_box(&diag), black_box(4.8))))
    });
}

fn bench_spectrum(c: &mut Criterion) {
    let spec = golden_sawtooth(10.0);
    let diag = spec.sample_orbit(233, false);
    let mut g = c.benchmark_group("spectrum_233");
    g.sample_size(20);
    g.bench_function("periodic", |b| {
        b.iter(|| spectrum_of_diag(black_box(&diag), BoundaryCondition::Periodic, 1e-10).unwrap())
    });
    g.bench_function("dirichlet", |b| {
        b.iter(|| spectrum_of_diag(black_box(&diag), BoundaryCondition::Dirichlet, 1e-10).unwrap())
    });
    g.finish();
}

fn bench_green(c: &mut Criterion) {
    let spec = golden_sawtooth(10.0);
    let gb = GreenBox::new(&spec, 0, 88, 4.8).unwrap();
    let mut g = c.benchmark_group("green_q89");
    g.bench_function("quotient", |b| {
        b.iter(|| black_box(gb.element(black_box(30), black_box(40)).unwrap()))
    });
    g.bench_function("direct", |b| {
        b.iter(|| black_box(gb.element_direct(black_box(30), black_box(40)).unwrap()))
    });
    g.finish();
}

fn bench_ids(c: &mut Criterion) {
    let spec = golden_sawtooth(2.0);
    let mut g = c.benchmark_group("ids_table");
    g.sample_size(10);
    g.bench_function("n89_20phases", |b| {
        b.iter(|| {
            let grid = IdsGrid::new(-2.5, 4.5, 0.05).unwrap();
            black_box(ids_estimate(&spec, 89, grid, 20, BoundaryCondition::Dirichlet).unwrap())
        })
    });
    g.finish();
}

criterion_group!(
    kernels,
    bench_orbit,
    bench_transfer,
    bench_det_sequence,
    bench_spectrum,
    bench_green,
    bench_ids
);
criterion_main!(kernels);
