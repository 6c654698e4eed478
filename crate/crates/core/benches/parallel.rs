use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use regraph::fitting::{fit, simulate_mannheim, FitConfig};
use regraph::graph::parse_graph;
use regraph::independence::structure;
use regraph::oracle::catalog;
use regraph::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(path).expect("fixture")
}

fn bench_structure(c: &mut Criterion) {
    let g = parse_graph(&fixture("development.txt")).unwrap();
    let mut group = c.benchmark_group("structure");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, g.num_nodes()), |b| {
            b.iter(|| structure(black_box(&g), 8, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_catalog(c: &mut Criterion) {
    let mut group = c.benchmark_group("catalog");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, 5), |b| b.iter(|| catalog::catalog(5, exec)));
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let cfg = FitConfig::from_toml(&fixture("mannheim.toml")).unwrap();
    let data = simulate_mannheim(1, 2000);
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, data.num_rows()), |b| {
            b.iter(|| fit(black_box(&data), &cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_structure, bench_catalog, bench_fit);
criterion_main!(benches);
