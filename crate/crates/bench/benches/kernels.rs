use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nnflow_bench::{power_law, smoke_config};
use nnflow_core::constitutive::{StressModel, Viscosity};
use nnflow_core::nfunction::{ConjugateParams, NFunction};
use nnflow_core::orlicz::{luxemburg_norm, SampledField};
use nnflow_core::solver::Solver;
use nnflow_core::tensor::SymMat;
use nnflow_core::TorusGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conjugate(c: &mut Criterion) {
    let params = ConjugateParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let l = SymMat::random_entries(3, -2.0, 2.0, &mut rng);
    let power = NFunction::power(3, 2.2).unwrap();
    let carreau = NFunction::carreau(3, 2.5).unwrap();
    let aniso = NFunction::anisotropic_separable(3, [[2.2, 3.0, 2.5], [3.0, 2.6, 2.8], [2.5, 2.8, 3.5]]).unwrap();
    let x = [0.0; 3];
    let mut g = c.benchmark_group("conjugate");
    g.bench_function("power/golden", |b| b.iter(|| power.conjugate_value(&x, black_box(&l), &params).unwrap()));
    g.bench_function("carreau/newton", |b| b.iter(|| carreau.conjugate(&x, black_box(&l), &params).unwrap()));
    g.bench_function("anisotropic/bfgs", |b| b.iter(|| aniso.conjugate_value(&x, black_box(&l), &params).unwrap()));
    g.finish();
}

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("step");
    g.sample_size(20);
    for n in [16usize, 32] {
        let solver = Solver::new(smoke_config(n, power_law(2.2))).unwrap();
        let state = solver.initial_state().unwrap();
        g.bench_function(format!("power-law/N={n}"), |b| b.iter(|| solver.step(black_box(&state), 1e-3).unwrap()));
    }
    let carreau = StressModel::carreau(2, 2.2, Viscosity::constant(1.0)).unwrap();
    let solver = Solver::new(smoke_config(32, carreau)).unwrap();
    let state = solver.initial_state().unwrap();
    g.bench_function("carreau/N=32", |b| b.iter(|| solver.step(black_box(&state), 1e-3).unwrap()));
    g.finish();
}

fn luxemburg(c: &mut Criterion) {
    let grid = TorusGrid::new(2, 32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<SymMat> = (0..grid.len()).map(|_| SymMat::random_entries(2, -1.0, 1.0, &mut rng)).collect();
    let field = SampledField::on_grid(&grid, &[1.0], values).unwrap();
    let power = NFunction::power(2, 2.2).unwrap();
    let carreau_star = NFunction::carreau(2, 2.2).unwrap().conjugate_function(ConjugateParams::default());
    let mut g = c.benchmark_group("luxemburg");
    g.bench_function("power/N=32", |b| b.iter(|| luxemburg_norm(&power, black_box(&field), 1e-6).unwrap()));
    g.sample_size(10);
    g.bench_function("carreau-conjugate/N=32", |b| {
        b.iter(|| luxemburg_norm(&carreau_star, black_box(&field), 1e-6).unwrap())
    });
    g.finish();
}

criterion_group!(benches, conjugate, step, luxemburg);
criterion_main!(benches);
