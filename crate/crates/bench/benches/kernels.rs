use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use blochwave::assembly::assemble_hat;
use blochwave::grid::build_grid;
use blochwave::medium::sample_coefficient;
use blochwave::{solve, GridSpec, RunConfig, Side};
use blochwave_bench::{crystal_cell, prepared_small};

fn cell(c: &mut Criterion) {
    let cp = crystal_cell();
    c.bench_function("cell_eigenvalues_20x19", |b| b.iter(|| cp.eigenvalues(black_box([0.1, 0.2]), 6).unwrap()));
    c.bench_function("cell_modes_20x19", |b| b.iter(|| cp.solve(black_box([0.1, 0.2]), 6, Side::Plus).unwrap()));
}

fn assembly(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let grid = build_grid(GridSpec::new(1.0, 15, 6, 14, 20, 19).unwrap()).unwrap();
    let coeff = sample_coefficient(&cfg.medium, &grid);
    c.bench_function("hat_assembly_full_grid", |b| b.iter(|| assemble_hat(&grid, black_box(&coeff)).unwrap()));
    let p = prepared_small();
    c.bench_function("enriched_assembly_small", |b| b.iter(|| p.assemble(black_box(1e-4)).unwrap()));
}

fn linear_solve(c: &mut Criterion) {
    let p = prepared_small();
    let sys = p.assemble(1e-4).unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    group.bench_function("enriched_solve_small", |b| b.iter(|| solve(black_box(&sys)).unwrap()));
    group.finish();
}

criterion_group!(benches, cell, assembly, linear_solve);
criterion_main!(benches);
