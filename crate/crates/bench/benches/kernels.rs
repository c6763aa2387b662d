use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use stabsurv::exit::{survival_curve, uniform_grid, McSettings};
use stabsurv::sampler::{sample_stable_step, sample_subordinator_increment};
use stabsurv::spectral::{frac_laplacian_1d, smallest_eigenvalue};
use stabsurv::{Domain, RngStream, StableParams};

fn sampler(c: &mut Criterion) {
    let mut g = c.benchmark_group("sampler");
    g.bench_function("subordinator_increment_beta_0.5", |b| {
        let mut rng = RngStream::new(1, 0);
        b.iter(|| sample_subordinator_increment(black_box(0.5), 1e-3, &mut rng).unwrap())
    });
    for (alpha, dim) in [(1.0, 1), (1.5, 2), (2.0, 2)] {
        let p = StableParams::new(alpha, dim).unwrap();
        g.bench_function(format!("stable_step_a{alpha}_d{dim}"), |b| {
            let mut rng = RngStream::new(1, 0);
            b.iter(|| sample_stable_step(&p, black_box(1e-3), &mut rng).unwrap())
        });
    }
    g.finish();
}

fn exit_mc(c: &mut Criterion) {
    let mut g = c.benchmark_group("exit_mc");
    g.sample_size(10);
    let dom = Domain::interval(-1.0, 1.0).unwrap();
    let p = StableParams::new(1.0, 1).unwrap();
    let grid = uniform_grid(4.0, 0.1).unwrap();
    let mc = McSettings::new(2000, 1e-3, 7);
    g.bench_function("survival_curve_cauchy_2000_paths", |b| {
        b.iter(|| survival_curve(&dom, &p, &[0.0], black_box(&grid), &mc).unwrap())
    });
    g.finish();
}

fn eigensolver(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigensolver");
    g.sample_size(10);
    for n in [256usize, 512] {
        g.bench_function(format!("assemble_n{n}"), |b| {
            b.iter(|| frac_laplacian_1d(1.0, 1.0, black_box(n)).unwrap())
        });
        g.bench_function(format!("smallest_eigenvalue_n{n}"), |b| {
            b.iter_batched(
                || frac_laplacian_1d(1.0, 1.0, n).unwrap(),
                |op| smallest_eigenvalue(&op).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, sampler, exit_mc, eigensolver);
criterion_main!(benches);
