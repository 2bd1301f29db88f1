use std::hint::black_box;

use biot_core::expr::Expr;
use biot_core::scenario::InitialContent;
use biot_core::{picard_solve, Discretization, PermeabilityLaw, Scenario};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn discretization(c: &mut Criterion) {
    let mut group = c.benchmark_group("discretization_2d");
    group.sample_size(10);
    for n in [8, 16] {
        group.bench_with_input(BenchmarkId::new("materialize_b", n), &n, |b, &n| {
            b.iter(|| Discretization::new(2, black_box(n)).unwrap())
        });
    }
    group.finish();
}

fn picard(c: &mut Criterion) {
    let law = PermeabilityLaw::clamped_exponential(1.0, 1.0, 0.2, 5.0).unwrap();
    let sc = Scenario::new(2, 8, 1.0, 0.125, 1.0, law)
        .with_source(Expr::parse("10*sin(pi*x)*sin(pi*y)*(1+t)").unwrap())
        .with_d0(InitialContent::Analytic(Expr::parse("sin(pi*x)*sin(pi*y)").unwrap()));
    let disc = Discretization::new(2, 8).unwrap();
    let mut group = c.benchmark_group("picard");
    group.sample_size(10);
    group.bench_function("clamped_exponential_2d_n8", |b| b.iter(|| picard_solve(&disc, black_box(&sc)).unwrap()));
    group.finish();
}

criterion_group!(benches, discretization, picard);
criterion_main!(benches);
