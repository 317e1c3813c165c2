//! Parallel against sequential execution of the two data-parallel hot paths:
//! the per-point subordination sweep and Monte Carlo trials.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use freeprob::free_arithmetic::{add_contour, free_add_with};
use freeprob::par::Exec;
use freeprob::rmt::{mc_free_add, EnsembleSpec};
use freeprob::{make_law, LawSpec};
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn subordination_sweep(c: &mut Criterion) {
    let a = make_law(&LawSpec::Semicircle { sigma: 1.0 }, 2000).unwrap();
    let b = make_law(&LawSpec::Uniform { lo: -1.0, hi: 1.0 }, 2000).unwrap();
    let contour = add_contour(&a, &b).unwrap();
    let mut group = c.benchmark_group("free_add");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, "semicircle+uniform"), |bench| {
            bench.iter(|| free_add_with(black_box(&a), black_box(&b), &contour, exec).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_free_add");
    group.sample_size(10);
    for dim in [64, 128] {
        let s1 = EnsembleSpec::gue(1.0, dim, 1).unwrap();
        let s2 = EnsembleSpec::wishart(0.5, dim, 2).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, dim), &dim, |bench, _| {
                bench.iter(|| mc_free_add(&s1, &s2, 8, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, subordination_sweep, monte_carlo);
criterion_main!(benches);
