use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdtree::greedy::{greedy_build, GreedyConfig};
use qdtree::harness::{generate, GeneratorSpec};
use qdtree::woodblock::{train, RlConfig};
use qdtree::{candidate_cuts, Execution};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn bench(c: &mut Criterion) {
    let (d, w) = generate(&GeneratorSpec::Uniform {
        rows: 200_000,
        columns: 4,
        domain: 10_000,
        queries: 32,
        seed: 1,
    })
    .unwrap();
    let cuts = candidate_cuts(&w, false);

    let mut g = c.benchmark_group("greedy_build");
    g.sample_size(10);
    for mode in MODES {
        let mut cfg = GreedyConfig::new(2000, cuts.clone());
        cfg.execution = mode;
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &cfg, |b, cfg| {
            b.iter(|| greedy_build(black_box(&d), &w, cfg).unwrap())
        });
    }
    g.finish();

    let tree = greedy_build(&d, &w, &GreedyConfig::new(2000, cuts.clone())).unwrap();
    let mut g = c.benchmark_group("route_rows");
    for mode in MODES {
        g.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| tree.route_rows_with(black_box(&d), mode))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("rl_rollouts");
    g.sample_size(10);
    for mode in MODES {
        let mut cfg = RlConfig::new(200);
        cfg.episodes = 32;
        cfg.execution = mode;
        g.bench_function(format!("{mode:?}"), |b| {
            b.iter(|| train(black_box(&d), &w, &cuts, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
