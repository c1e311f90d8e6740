//! Parallel vs sequential timings of the hot loops.
//!
//! With the default `parallel` feature every workload runs twice: inside a
//! one-thread rayon pool and inside the default pool. Built with
//! `--no-default-features` the same workloads run through the sequential
//! code path and are labelled `sequential`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sl2lab::cayley::{build_generator_set_bg, second_eigenvalue, symmetrize, CayleyGraph, SpectralOptions};
use sl2lab::incidence::{build_h_set, count_bg_general, multiplicity_map, SFamily, DEFAULT_BUDGET};
use sl2lab::qr::gap_scan;
use sl2lab::sets::PointSet;
use sl2lab::sl2::Sl2Group;
use sl2lab::{FieldCtx, Mat2};

fn modes() -> Vec<(&'static str, Option<usize>)> {
    if cfg!(feature = "parallel") {
        vec![("one-thread", Some(1)), ("pool", None)]
    } else {
        vec![("sequential", None)]
    }
}

fn run_in<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f),
        None => f(),
    }
}

fn bench_counting(c: &mut Criterion) {
    let f = FieldCtx::new(10_007).unwrap();
    let w = Mat2::w(&f);
    let r = PointSet::residues(&f);
    let s = SFamily::grid(12, 1, 1).unwrap();
    let mut group = c.benchmark_group("count_bg_general");
    for (label, threads) in modes() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| run_in(threads, || count_bg_general(&f, &w, &s, &r, &r).unwrap().exact_count))
        });
    }
    group.finish();
}

fn bench_spectral(c: &mut Criterion) {
    let f = FieldCtx::new(13).unwrap();
    let gens = symmetrize(&f, &build_generator_set_bg(&f, &Mat2::w(&f), 3).unwrap());
    let graph = CayleyGraph::sl2(&Sl2Group::new(f.clone()), &gens).unwrap();
    let opts = SpectralOptions::default();
    let mut group = c.benchmark_group("lambda2_sl2_13");
    group.sample_size(10);
    for (label, threads) in modes() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| run_in(threads, || second_eigenvalue(&graph, &opts).unwrap().lambda2))
        });
    }
    group.finish();
}

fn bench_products(c: &mut Criterion) {
    let f = FieldCtx::new(101).unwrap();
    let h = build_h_set(&f, &Mat2::w(&f), &SFamily::grid(3, 1, 1).unwrap()).unwrap();
    let mut group = c.benchmark_group("multiplicity_l2");
    group.sample_size(10);
    for (label, threads) in modes() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| run_in(threads, || multiplicity_map(&f, &h, 2, DEFAULT_BUDGET).unwrap().len()))
        });
    }
    group.finish();
}

fn bench_gaps(c: &mut Criterion) {
    let mut group = c.benchmark_group("gap_scan_1e5");
    group.sample_size(10);
    for (label, threads) in modes() {
        group.bench_function(BenchmarkId::from_parameter(label), |b| {
            b.iter(|| run_in(threads, || black_box(gap_scan(100_000, 1000)).max_ratio))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_counting, bench_spectral, bench_products, bench_gaps);
criterion_main!(benches);
