use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use li2::clarkson::detect_redundancies;
use li2::generate::{generate, GenSpec};
use li2::hochbaum_naor::{hn_solve, Mode};
use li2::{par, Li2System};

fn instance(n: usize, d: usize, pins: usize, seed: u64) -> Li2System {
    generate(&GenSpec { pin_vars: pins, planted_redundant: n / 10, ..GenSpec::new(seed, n, d) }).unwrap().0
}

fn batch() -> Vec<Li2System> {
    (0..64).map(|s| instance(30, 6, (s % 3) as usize, s)).collect()
}

#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    [("one-thread".to_string(), 1), (format!("pool-{all}"), all)]
        .into_iter()
        .map(|(name, t)| (name, rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap()))
        .collect()
}

#[cfg(feature = "parallel")]
fn threads(c: &mut Criterion) {
    let mut g = c.benchmark_group("hn_feasible_d50");
    g.sample_size(10);
    for n in [5_000, 20_000] {
        let sys = instance(n, 50, 0, 7);
        for (name, pool) in pools() {
            g.bench_with_input(BenchmarkId::new(name, n), &sys, |b, s| {
                b.iter(|| pool.install(|| hn_solve(black_box(s), Mode::Feasible)))
            });
        }
    }
    g.finish();

    let systems = batch();
    let mut g = c.benchmark_group("redundancy_batch");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(name, |b| b.iter(|| pool.install(|| par::map(&systems, detect_redundancies))));
    }
    g.finish();
}

#[cfg(not(feature = "parallel"))]
fn threads(_: &mut Criterion) {}

/// The same batch without any pool; with `--no-default-features` this is
/// the sequential build.
fn sequential(c: &mut Criterion) {
    let mut g = c.benchmark_group("hn_feasible_d50");
    g.sample_size(10);
    let label = if par::enabled() { "par-default" } else { "sequential-build" };
    for n in [5_000, 20_000] {
        let sys = instance(n, 50, 0, 7);
        g.bench_with_input(BenchmarkId::new(label, n), &sys, |b, s| b.iter(|| hn_solve(black_box(s), Mode::Feasible)));
    }
    g.finish();

    let systems = batch();
    let mut g = c.benchmark_group("redundancy_batch");
    g.sample_size(10);
    g.bench_function(if par::enabled() { "par-map" } else { "sequential-build" }, |b| {
        b.iter(|| par::map(black_box(&systems), detect_redundancies))
    });
    g.bench_function("plain-loop", |b| {
        b.iter(|| black_box(&systems).iter().map(detect_redundancies).collect::<Vec<_>>())
    });
    g.finish();
}

criterion_group!(benches, threads, sequential);
criterion_main!(benches);
