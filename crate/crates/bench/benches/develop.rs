use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use cortexsom::{develop_network, find_winner, train, update_step, PathologySpec, TrainingConfig};
use cortexsom_bench::{primary_fixture, short_network};

fn single_step(c: &mut Criterion) {
    let (map, stimuli) = primary_fixture(1);
    let x = stimuli.patterns()[2].values.clone();
    let cfg = TrainingConfig::default();
    c.bench_function("find_winner 20x20", |b| b.iter(|| find_winner(black_box(&map), black_box(&x))));
    for (name, p) in [
        ("update_step none", PathologySpec::none()),
        ("update_step omega", PathologySpec::over_strengthen(5.0)),
        ("update_step xi", PathologySpec::increase_factor(1.1)),
    ] {
        c.bench_function(name, |b| {
            b.iter_batched(
                || map.clone(),
                |mut m| update_step(&mut m, &x, &cfg, &p).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn training(c: &mut Criterion) {
    let (map, stimuli) = primary_fixture(3);
    let cfg = TrainingConfig::default();
    let mut g = c.benchmark_group("train");
    g.sample_size(10);
    g.bench_function("1400 steps", |b| {
        b.iter(|| train(black_box(map.clone()), &stimuli, &cfg, &PathologySpec::none()).unwrap())
    });
    g.finish();
}

fn network(c: &mut Criterion) {
    let mut g = c.benchmark_group("develop_network");
    g.sample_size(10);
    g.bench_function("reference", |b| {
        let spec = short_network(1400);
        b.iter(|| develop_network(black_box(&spec)).unwrap())
    });
    g.bench_function("200 steps", |b| {
        let spec = short_network(200);
        b.iter(|| develop_network(black_box(&spec)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, single_step, training, network);
criterion_main!(benches);
