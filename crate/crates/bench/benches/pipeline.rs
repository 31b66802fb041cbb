use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyperdiffuse::model::train_on_diffused;
use hyperdiffuse::{
    build_transition, DiffusionOperator, DiffusionParams, RhoFunction, TrainConfig,
};
use hyperdiffuse_bench::fixture;

fn transition(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_transition");
    for n in [1_000, 10_000] {
        let inst = fixture(n, 16);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| build_transition(&inst.hypergraph, RhoFunction::new(-0.5), true).unwrap())
        });
    }
    group.finish();
}

fn diffusion(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_diffusion");
    let inst = fixture(10_000, 64);
    let t = build_transition(&inst.hypergraph, RhoFunction::constant(), true).unwrap();
    for steps in [2, 8, 32] {
        let op = DiffusionOperator::new(
            &t,
            DiffusionParams {
                alpha: 0.9,
                beta: 0.95,
                steps,
            },
        )
        .unwrap();
        group.bench_with_input(BenchmarkId::new("t", steps), &op, |b, op| {
            b.iter(|| op.apply_diffusion(&inst.features).unwrap())
        });
    }
    group.finish();
}

fn training_epoch(c: &mut Criterion) {
    let inst = fixture(2_000, 64);
    let t = build_transition(&inst.hypergraph, RhoFunction::constant(), true).unwrap();
    let params = DiffusionParams {
        alpha: 1.0,
        beta: 1.0,
        steps: 4,
    };
    let s = DiffusionOperator::new(&t, params)
        .unwrap()
        .apply_diffusion(&inst.features)
        .unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        patience: 1,
        diffusion: params,
        ..TrainConfig::default()
    };
    c.bench_function("train_epoch/n=2000,hidden=128", |b| {
        b.iter(|| train_on_diffused(s.matrix(), &inst.labels, &inst.split, &cfg).unwrap())
    });
}

criterion_group!(benches, transition, diffusion, training_epoch);
criterion_main!(benches);
