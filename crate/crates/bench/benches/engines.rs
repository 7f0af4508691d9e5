use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qrw_bench::Fixture;
use qrw_core::flow::FlowOracle;
use qrw_core::walk::DEFAULT_DENSE_CAP;
use std::hint::black_box;

fn engines(c: &mut Criterion) {
    let mut group = c.benchmark_group("matrix_element");
    for n in [2, 4, 6, 8] {
        let fx = Fixture::new(2, 1, n, 0.125, 7);
        group.bench_with_input(BenchmarkId::new("streaming", n), &fx, |b, fx| {
            b.iter(|| fx.walk.matrix_element(&fx.x, &fx.u, &fx.v, &fx.fa, &fx.ga).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("dense", n), &fx, |b, fx| {
            b.iter(|| {
                let state = fx.walk.dense_state(&fx.x, &fx.u, &fx.fa, DEFAULT_DENSE_CAP).unwrap();
                black_box(qrw_core::ToyState::product(&fx.v, &fx.ga).inner(&state))
            })
        });
    }
    group.finish();
}

fn streaming_long(c: &mut Criterion) {
    let mut group = c.benchmark_group("streaming_steps");
    for n in [64, 512, 4096] {
        let fx = Fixture::new(3, 2, n, 1.0 / n as f64, 11);
        group.bench_with_input(BenchmarkId::from_parameter(n), &fx, |b, fx| {
            b.iter(|| fx.walk.matrix_element(&fx.x, &fx.u, &fx.v, &fx.fa, &fx.ga).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let fx = Fixture::new(3, 2, 8, 0.125, 13);
    let flow = FlowOracle::new(&fx.model);
    c.bench_function("oracle_rk4_256", |b| {
        b.iter(|| flow.functional(&fx.u, &fx.v, &fx.f, &fx.g, fx.t(), 256).unwrap().apply(&fx.x))
    });
}

criterion_group!(benches, engines, streaming_long, oracle);
criterion_main!(benches);
