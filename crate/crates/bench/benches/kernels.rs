use std::f64::consts::TAU;

use bosegas::decomposition::verify_mixing_identity;
use bosegas::pathspace::{markov_identity_check, matsubara_sum, sample_field, trace_condition_check, ModePath, TraceCutoffs};
use bosegas::quasilocal::consistency_check;
use bosegas::thermo::{critical_density, solve_fugacity_auto};
use bosegas::{ChiMode, FormContext, ModelParams, PathSpaceSpec, ProjectiveChain, RegExponents, TestFunction};
use criterion::{black_box, criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

fn thermo(c: &mut Criterion) {
    c.bench_function("critical_density_d3_s2", |b| b.iter(|| critical_density(black_box(1.0), 3, 2.0).unwrap()));
    let params = ModelParams::new(3, 2.0, 1.0, 0.0, 0.1172, 16.0).unwrap();
    c.bench_function("fugacity_L16", |b| b.iter(|| solve_fugacity_auto(black_box(&params), 16.0).unwrap()));
}

fn forms(c: &mut Criterion) {
    let ctx = FormContext::new(1.0, 0.0, 3, 2.0, 0.0586).unwrap();
    let f = TestFunction::gaussian(3, Complex64::new(0.6, -0.2), 1.1).unwrap();
    c.bench_function("mixing_quadrature", |b| b.iter(|| verify_mixing_identity(black_box(&f), &ctx, ChiMode::quadrature()).unwrap()));
}

fn pathspace(c: &mut Criterion) {
    c.bench_function("matsubara_1e4", |b| b.iter(|| matsubara_sum(black_box(0.25), 1.0, 1.0, 10_000).unwrap()));
    let reg = RegExponents::standard(2.0).unwrap();
    c.bench_function("trace_condition_s2", |b| b.iter(|| trace_condition_check(3, 2.0, reg, 1.0, TraceCutoffs::default()).unwrap()));
    let path = ModePath::matsubara(1.0, 1.3, 2, Complex64::new(1.0, 0.5)).unwrap();
    c.bench_function("markov_512", |b| b.iter(|| markov_identity_check(black_box(&path), 512).unwrap()));
    let spec = PathSpaceSpec::cube(1.0, 2.0, 3, 4.0, 2, 1, reg).unwrap();
    c.bench_function("sample_field_1e3", |b| b.iter(|| sample_field(&spec, black_box(7), 1_000).unwrap()));
}

fn quasilocal(c: &mut Criterion) {
    let chain = ProjectiveChain::new(1.0, 2.0, 3, 1.0, 1, TAU, vec![2, 2]).unwrap();
    let grid: Vec<_> = (0..4).map(|i| chain.random_vector(0, 6, i)).collect();
    c.bench_function("consistency_3_levels", |b| b.iter(|| consistency_check(&chain, black_box(&grid), 1).unwrap()));
}

criterion_group!(benches, thermo, forms, pathspace, quasilocal);
criterion_main!(benches);
