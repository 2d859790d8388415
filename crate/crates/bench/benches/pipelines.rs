use std::hint::black_box;

use ayang_core::cato::{toy_a2_modules, CatOContext, R0Evaluator};
use ayang_core::resum::Eta;
use ayang_core::rminus::{recurse_rminus, synthetic_instance, Mode};
use ayang_core::series::FormalContext;
use ayang_core::{analyze, build_cartan, AffineTypeId};
use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64 as C64;

fn id(s: &str) -> AffineTypeId {
    s.parse().expect("valid type id")
}

fn qcartan(c: &mut Criterion) {
    let mut g = c.benchmark_group("det_bt");
    for t in ["A8~1", "E8~1", "D8~2", "A8~2"] {
        let d = build_cartan(id(t)).unwrap();
        g.bench_function(t, |b| b.iter(|| analyze(black_box(&d))));
    }
    g.finish();
}

fn formal(c: &mut Criterion) {
    let mut g = c.benchmark_group("formal_r0");
    g.sample_size(10);
    for t in ["A2~1", "G2~1"] {
        let ctx = FormalContext::new(&build_cartan(id(t)).unwrap());
        g.bench_function(format!("{t} order 12"), |b| b.iter(|| ctx.solve_l(black_box(12)).unwrap()));
    }
    g.finish();
}

fn r0_eval(c: &mut Criterion) {
    let ctx = CatOContext::new(&build_cartan(id("A2~1")).unwrap()).unwrap();
    let (v1, v2) = toy_a2_modules(C64::new(1.0, 0.0));
    let e = R0Evaluator::new(&ctx, &v1, &v2).unwrap();
    c.bench_function("r0 A2~1 toy modules", |b| b.iter(|| e.exponents(Eta::Up, black_box(C64::new(3.0, 1.0))).unwrap()));
}

fn rminus(c: &mut Criterion) {
    let data = synthetic_instance();
    let mut g = c.benchmark_group("rminus synthetic");
    g.bench_function("exact", |b| b.iter(|| recurse_rminus(black_box(&data), 2, Mode::Exact).unwrap()));
    g.bench_function("series 30", |b| b.iter(|| recurse_rminus(black_box(&data), 2, Mode::Series(30)).unwrap()));
    g.finish();
}

criterion_group!(benches, qcartan, formal, r0_eval, rminus);
criterion_main!(benches);
