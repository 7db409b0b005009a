//! Microbenchmarks for the hot paths: posterior prediction, incremental
//! conditioning, acquisition maximization, and rollout scoring.

use std::sync::Arc;

use ccbo::{
    ei_evaluator, maximize, rollout_acquisition, BoState, CostModel, Dataset, Domain,
    GpHyperparams, GpModel, MaximizerConfig, Observation, ProblemCost, RolloutConfig,
};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn fixture_model(n: usize) -> GpModel {
    let domain = Domain::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut data = Dataset::new();
    for _ in 0..n {
        let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
        let v = (3.0 * p[0]).sin() + (2.0 * p[1]).cos();
        data.push(Observation::new(p, v, 1.0)).unwrap();
    }
    let hp = GpHyperparams {
        lengthscales: vec![0.4, 0.4],
        amplitude: 1.5,
        noise_variance: 1e-4,
        prior_mean: 0.0,
    };
    GpModel::with_hyperparams(&domain, &data, hp).unwrap()
}

fn bench_posterior(c: &mut Criterion) {
    let model = fixture_model(25);
    let x = [0.3, -0.4];
    c.bench_function("posterior_n25", |b| b.iter(|| model.posterior(&x)));
}

fn bench_condition(c: &mut Criterion) {
    let model = fixture_model(25);
    let obs = Observation::new(vec![0.1, 0.2], -0.5, 1.0);
    c.bench_function("condition_n25", |b| {
        b.iter_batched(
            || model.clone(),
            |m| m.condition(&obs).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_maximize_ei(c: &mut Criterion) {
    let model = fixture_model(25);
    let best = model.data().best_value().unwrap();
    let mcfg = MaximizerConfig::for_dim(2).with_seed(7);
    c.bench_function("maximize_ei_n25", |b| {
        b.iter(|| maximize(ei_evaluator(&model, best), model.domain(), &mcfg).unwrap())
    });
}

fn bench_rollout_score(c: &mut Criterion) {
    let model = fixture_model(15);
    let cost = CostModel::analytic(ProblemCost::stateless(Arc::new(|x: &[f64]| {
        1.0 + 0.5 * (x[0] + 1.0)
    })));
    let state = BoState::new(model, cost, 50.0).unwrap().with_cost_floor(1e-4);
    let mut cfg = RolloutConfig::new(2, 2).with_seed(3);
    cfg.samples = 8;
    let mcfg = MaximizerConfig::for_dim(2).with_seed(5);
    let x = [0.25, 0.6];
    c.bench_function("rollout_h2_s8_n15", |b| {
        b.iter(|| rollout_acquisition(&state, &x, &cfg, &mcfg).unwrap())
    });
}

criterion_group!(
    benches,
    bench_posterior,
    bench_condition,
    bench_maximize_ei,
    bench_rollout_score
);
criterion_main!(benches);
