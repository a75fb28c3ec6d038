//! Benchmarks for the hot paths: the inner allocation kernel, objective
//! assembly and evaluation, one full pessimistic backup per shape class, and
//! a discrete value-iteration step.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use caimdp_core::bellman::{descending_permutation, discrete_vi, mp_objective, pessimistic_backup};
use caimdp_core::experiments::{generate, GeneratorConfig};
use caimdp_core::inner_opt::{worst_case_distribution, IntervalSimplex};
use caimdp_core::model::Caimdp;
use caimdp_core::optimizers::OptimizerConfig;
use caimdp_core::sampling;

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> (IntervalSimplex, Vec<f64>) {
    let lo: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0 / n as f64)).collect();
    let hi: Vec<f64> = lo
        .iter()
        .map(|&l| rng.gen_range(1.0 / n as f64..1.0).max(l))
        .collect();
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    (IntervalSimplex::new(lo, hi).unwrap(), v)
}

fn generated(n_states: usize) -> Caimdp {
    generate(&GeneratorConfig {
        n_states,
        seed: 7,
        ..Default::default()
    })
    .unwrap()
}

fn bench_inner_allocation(c: &mut Criterion) {
    let mut group = c.benchmark_group("worst_case_distribution");
    for n in [5usize, 25, 100] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let (gamma, v) = random_simplex(&mut rng, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| worst_case_distribution(black_box(&gamma), black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn bench_objective(c: &mut Criterion) {
    let imdp = generated(25);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..10.0)).collect();
    let (sorted_v, perm) = descending_permutation(&v);
    let a = sampling::quasi_in_set(imdp.action_set(), 1, 5).remove(0);

    c.bench_function("mp_objective_build", |b| {
        b.iter(|| mp_objective(black_box(&imdp), 0, 12, &sorted_v, &perm).unwrap())
    });
    let obj = mp_objective(&imdp, 0, 12, &sorted_v, &perm).unwrap();
    c.bench_function("mp_objective_eval", |b| {
        b.iter(|| black_box(&obj).value(black_box(&a)))
    });
}

fn bench_backup(c: &mut Criterion) {
    let cfg = OptimizerConfig::default();
    let mut group = c.benchmark_group("pessimistic_backup");
    group.sample_size(10);
    for n in [10usize, 25] {
        let imdp = generated(n);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        group.bench_with_input(BenchmarkId::new("concave_convex", n), &n, |b, _| {
            b.iter(|| pessimistic_backup(black_box(&imdp), black_box(&v), 1.0, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_discrete_vi(c: &mut Criterion) {
    let imdp = generated(25);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let actions = sampling::uniform_in_set(imdp.action_set(), 125, &mut rng).unwrap();
    let mut group = c.benchmark_group("discrete_vi");
    group.sample_size(10);
    group.bench_function("s125_n25_h10", |b| {
        b.iter(|| discrete_vi(black_box(&imdp), black_box(&actions), 10, 1.0).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_inner_allocation,
    bench_objective,
    bench_backup,
    bench_discrete_vi
);
criterion_main!(benches);
