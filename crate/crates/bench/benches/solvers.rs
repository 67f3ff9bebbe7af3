use std::hint::black_box;
use std::sync::Arc;

use cordes_core::perturb::zero_order_rhs;
use cordes_core::{
    radial_solution, solve_cordes_mode, x_norm, y_norm, ForcingKind, GridSpec, ModeProfile, ModeSet, ProblemParams,
    ZeroOrderConfig,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn case1() -> ProblemParams {
    ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap()
}

fn radial(c: &mut Criterion) {
    let params = case1();
    c.bench_function("radial_solution N=4 gamma=1 p=3", |b| b.iter(|| radial_solution(black_box(&params)).unwrap()));
}

fn mode_solve(c: &mut Criterion) {
    let params = case1();
    let grid = Arc::new(GridSpec::default().build());
    let mut g = c.benchmark_group("solve_cordes_mode");
    for k in [0usize, 4] {
        let data = ModeProfile::from_values(k, grid.clone(), |r| r.powi(k as i32) * (1.0 + r));
        g.bench_function(format!("k={k}"), |b| b.iter(|| solve_cordes_mode(k, black_box(&data), &params).unwrap()));
    }
    g.finish();
}

fn norms(c: &mut Criterion) {
    let params = case1();
    let grid = Arc::new(GridSpec::default().build());
    let f = ModeSet {
        modes: (0..4)
            .map(|k| ModeProfile::from_values(k, grid.clone(), move |r| r.powi(k as i32 + 1) * (1.0 - r)).with_fd_derivatives())
            .collect(),
    };
    c.bench_function("x_norm 4 modes", |b| b.iter(|| x_norm(black_box(&f), &params).unwrap()));
    c.bench_function("y_norm 4 modes", |b| b.iter(|| y_norm(black_box(&f), &params).unwrap()));
}

fn zero_order_step(c: &mut Criterion) {
    let params = ProblemParams::new(4, 3.0, 3.0, -0.125, 5.0).unwrap();
    let w = radial_solution(&params).unwrap();
    let cfg = ZeroOrderConfig::new(params, 0.01, ForcingKind::One.modes(4, &w.grid, 8).unwrap());
    let phi = ModeSet::single(ModeProfile::zero(0, w.grid.clone()));
    c.bench_function("zero_order_rhs kmax=8", |b| b.iter(|| zero_order_rhs(black_box(&phi), &w, &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = radial, mode_solve, norms, zero_order_step
}
criterion_main!(benches);
