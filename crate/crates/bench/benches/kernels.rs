use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use muxfer::basis::{build_sector_basis, sector_overlap, Axis, OneDimProblem};
use muxfer::matching::s_from_k;
use muxfer::propagator::{de_vogelaere_step, FnCoupling, PropagationState};
use muxfer::specfun::{coulomb_continuum, gauss_legendre};
use muxfer_bench::{small_basis, symmetric, system};
use nalgebra::DMatrix;

fn special_functions(c: &mut Criterion) {
    c.bench_function("coulomb_continuum eta=5 l=3", |b| b.iter(|| coulomb_continuum(black_box(5.0), 3, black_box(40.0))));
    c.bench_function("gauss_legendre 96", |b| b.iter(|| gauss_legendre(black_box(96))));
}

fn one_dimensional(c: &mut Criterion) {
    let s = system();
    let rho = 10.0 * s.muonic_bohr();
    c.bench_function("xi problem 48", |b| {
        b.iter(|| OneDimProblem::new(&s, Axis::Xi, rho, 48).solve(black_box(-300.0)))
    });
}

fn sectors(c: &mut Criterion) {
    let s = system();
    let settings = small_basis();
    let rho = 5.0 * s.muonic_bohr();
    let mut g = c.benchmark_group("sector");
    g.sample_size(10);
    g.bench_function("build small", |b| b.iter(|| build_sector_basis(&s, black_box(rho), 0.0, &settings).unwrap()));
    let a = build_sector_basis(&s, rho, 0.0, &settings).unwrap();
    let next = build_sector_basis(&s, 1.05 * rho, 0.0, &settings).unwrap();
    g.bench_function("overlap small", |b| b.iter(|| sector_overlap(&s, &a, &next)));
    g.finish();
}

fn propagation(c: &mut Criterion) {
    let n = 46;
    let w = symmetric(n);
    let q = FnCoupling { dim: n, f: move |r: f64, out: &mut DMatrix<f64>| out.copy_from(&(&w * (1.0 / (1.0 + r)))) };
    c.bench_function("de Vogelaere step 46", |b| {
        let mut st = PropagationState::regular(1.0, n);
        b.iter(|| de_vogelaere_step(&mut st, &q, black_box(1e-4)))
    });
    let k = symmetric(20);
    c.bench_function("S from K 20", |b| b.iter(|| s_from_k(black_box(&k)).unwrap()));
}

criterion_group!(benches, special_functions, one_dimensional, sectors, propagation);
criterion_main!(benches);
