use criterion::{criterion_group, criterion_main, Criterion};
use lwrcert_core::certify::{certification_sweep, SweepOptions};
use lwrcert_core::lwr::{godunov_solve, lax_hopf_solve, mass_balance, Environment, Grid, PiecewiseConstantProfile};
use std::hint::black_box;

fn solvers(c: &mut Criterion) {
    let profile = PiecewiseConstantProfile::paper();
    let grid = Grid::paper_closed();
    let mut g = c.benchmark_group("solvers_501x501");
    g.sample_size(10);
    for v_f in [5.0, 25.0, 45.0] {
        let env = Environment::paper().with_v_f(v_f).unwrap();
        g.bench_function(format!("lax_hopf_vf{v_f}"), |b| {
            b.iter(|| lax_hopf_solve(black_box(&profile), &env, &grid).unwrap())
        });
        g.bench_function(format!("godunov_vf{v_f}"), |b| {
            b.iter(|| godunov_solve(black_box(&profile), &env, &grid).unwrap())
        });
    }
    let field = godunov_solve(&profile, &Environment::paper(), &grid).unwrap();
    g.bench_function("mass_balance", |b| b.iter(|| mass_balance(black_box(&field))));
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let profile = PiecewiseConstantProfile::paper();
    let grid = Grid::paper();
    let env = Environment::paper();
    let model = lax_hopf_solve(&profile, &env, &grid).unwrap().1;
    let speeds: Vec<f64> = (1..=9).map(|k| 5.0 * k as f64).collect();
    let mut g = c.benchmark_group("certification");
    g.sample_size(10);
    g.bench_function("nine_env_sweep_fixed_field", |b| {
        b.iter(|| {
            certification_sweep(
                &model,
                &env,
                black_box(&speeds),
                &grid,
                &profile,
                &SweepOptions::default(),
            )
            .unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, solvers, sweep);
criterion_main!(benches);
