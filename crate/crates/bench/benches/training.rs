use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lwrcert_core::lwr::{lax_hopf_solve, Environment, Grid, PiecewiseConstantProfile};
use lwrcert_core::nn::{
    adam_step, default_layer_sizes, init_params_with, layer_sizes, loss_and_gradient, sample_dataset, tanh_in_place,
    Activation, AdamConfig, AdamState, InputNormalization,
};
use std::hint::black_box;

fn gradient(c: &mut Criterion) {
    let grid = Grid::paper();
    let field = lax_hopf_solve(&PiecewiseConstantProfile::paper(), &Environment::paper(), &grid)
        .unwrap()
        .1;
    let samples = sample_dataset(&field, 15_000, 1).unwrap();
    let norm = InputNormalization::for_grid(&grid);
    let mut g = c.benchmark_group("loss_and_gradient_15000");
    g.sample_size(10);
    for (name, sizes) in [("4x20", layer_sizes(4, 20)), ("10x40", default_layer_sizes())] {
        let params = init_params_with(&sizes, Activation::Tanh, norm, 0).unwrap();
        g.bench_function(name, |b| {
            b.iter(|| loss_and_gradient(black_box(&params), &samples).unwrap())
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernels");
    let xs: Vec<f64> = (0..4096).map(|i| (i as f64 - 2048.0) / 256.0).collect();
    g.throughput(Throughput::Elements(xs.len() as u64));
    g.bench_function("tanh_in_place_4096", |b| {
        b.iter_batched_ref(|| xs.clone(), |v| tanh_in_place(v), criterion::BatchSize::SmallInput)
    });
    g.bench_function("libm_tanh_4096", |b| {
        b.iter_batched_ref(
            || xs.clone(),
            |v| v.iter_mut().for_each(|x| *x = x.tanh()),
            criterion::BatchSize::SmallInput,
        )
    });
    let n = lwrcert_core::nn::param_count(&default_layer_sizes());
    let grad: Vec<f64> = (0..n).map(|i| ((i % 7) as f64 - 3.0) * 1e-3).collect();
    g.bench_with_input(BenchmarkId::new("adam_step", n), &n, |b, &n| {
        let mut params = vec![0.1; n];
        let mut state = AdamState::new(n);
        let cfg = AdamConfig::default();
        b.iter(|| adam_step(&mut params, black_box(&grad), &mut state, &cfg))
    });
    g.finish();
}

criterion_group!(benches, gradient, kernels);
criterion_main!(benches);
