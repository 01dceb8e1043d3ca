use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hexflow_bench::{random_program, staircase};
use hexflow_core::chfield::{minimal_field, solve};
use hexflow_core::flow::{evolve, FlowOptions};
use hexflow_core::scenarios::{split_prone_quadruple, wulff_hexagon};
use hexflow_core::shrinker::{classify_all, solve_all, InteriorConfig};

fn chfield(c: &mut Criterion) {
    let mut g = c.benchmark_group("chfield");
    for n in [2, 4, 8, 16] {
        let prog = random_program(n, 7);
        g.bench_with_input(BenchmarkId::new("dense_program", n), &prog, |b, p| b.iter(|| solve(black_box(p))));
    }
    let quad = split_prone_quadruple(0.1);
    g.bench_function("split_prone_quadruple", |b| b.iter(|| minimal_field(black_box(&quad))));
    for steps in [4, 16, 64] {
        let net = staircase(steps);
        g.bench_with_input(BenchmarkId::new("staircase", steps), &net, |b, n| b.iter(|| minimal_field(black_box(n))));
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let hex = wulff_hexagon(1.0);
    let opts = FlowOptions::default();
    c.bench_function("evolve_hexagon_to_collapse", |b| b.iter(|| evolve(black_box(&hex), 1.0, &opts)));
}

fn shrinker(c: &mut Criterion) {
    let pair = InteriorConfig::parse("A1,A2").unwrap();
    c.bench_function("shrinker_adjacent_pair", |b| b.iter(|| solve_all(black_box(pair))));
    let mut g = c.benchmark_group("classification");
    g.sample_size(10);
    g.bench_function("classify_all", |b| b.iter(classify_all));
    g.finish();
}

criterion_group!(benches, chfield, flow, shrinker);
criterion_main!(benches);
