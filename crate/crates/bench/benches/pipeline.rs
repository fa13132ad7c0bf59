use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use minibmc_bench::workloads;
use minibmc_core::{verify_source, RunOptions, SolverChoice};

fn full_pipeline(c: &mut Criterion) {
    let opts = RunOptions::default();
    let mut g = c.benchmark_group("verify");
    for (name, src) in workloads("example_") {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &src, |b, src| b.iter(|| verify_source(black_box(src), "bench.cpp", &opts)));
    }
    g.finish();
}

fn front_end_and_symex(c: &mut Criterion) {
    let opts = RunOptions { solver: SolverChoice::None, ..Default::default() };
    let mut g = c.benchmark_group("no_solver");
    for (name, src) in workloads("example_") {
        g.bench_with_input(BenchmarkId::from_parameter(&name), &src, |b, src| b.iter(|| verify_source(black_box(src), "bench.cpp", &opts)));
    }
    g.finish();
}

fn unwinding(c: &mut Criterion) {
    let mut g = c.benchmark_group("unwind");
    let src = "int main() { int s = 0; for (int i = 0; i < 64; i++) { s += nondet_int() & 1; } assert(s <= 64); }";
    for k in [8u32, 16, 32, 64] {
        let opts = RunOptions { unwind: k, ..Default::default() };
        g.bench_with_input(BenchmarkId::from_parameter(k), &opts, |b, o| b.iter(|| verify_source(src, "bench.cpp", o)));
    }
    g.finish();
}

criterion_group!(benches, full_pipeline, front_end_and_symex, unwinding);
criterion_main!(benches);
