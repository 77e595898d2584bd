use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evalcards_core::cards::{analyze, render_within, RenderOptions};
use evalcards_core::metrics::{compute_metrics, MetricOptions};
use evalcards_core::synth::{generate_bundle_with, Archetype, SynthProfile};
use evalcards_core::taxonomy::parse_config;
use evalcards_core::Execution;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn profile(n_users: u32) -> SynthProfile {
    SynthProfile {
        archetype: Archetype::Nonlinear,
        n_users,
        tasks: vec!["classification".into(), "regression".into()],
        dwell_ms: (2_000, 120_000),
        iteration_pair: None,
        seed: 2020,
    }
}

fn pipeline(c: &mut Criterion) {
    let model = parse_config(include_str!("../../../fixtures/taxonomy/tworavens.toml")).unwrap();
    let options = MetricOptions::default();

    let mut group = c.benchmark_group("synth");
    for users in [41, 400] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, users), &users, |b, &n| {
                b.iter(|| generate_bundle_with(&model, &profile(n), exec).unwrap())
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("metrics");
    for users in [41, 400] {
        let out = generate_bundle_with(&model, &profile(users), Execution::Parallel).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, users), &out.bundle, |b, bundle| {
                b.iter(|| compute_metrics(black_box(bundle), &options, exec).unwrap())
            });
        }
    }
    group.finish();

    let out = generate_bundle_with(&model, &profile(41), Execution::Parallel).unwrap();
    let export = analyze(&out.bundle, &out.survey, &options, Execution::Parallel).unwrap();
    let mut group = c.benchmark_group("render");
    for (name, exec) in MODES {
        let opts = RenderOptions {
            exec,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| render_within(black_box(&export), &[], &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
