use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use marcin_clt::charfn::{winding_number, zero_free_radius, ScanOptions};
use marcin_clt::dpp::{alpha_det, fredholm_log_laplace, sample_dpp_many};
use marcin_clt_bench::{gaussian_window, projection_window, rademacher_sum};
use num_complex::Complex64;

fn bench_alpha_det(c: &mut Criterion) {
    let (dk, _) = gaussian_window(0.5, 4.0, 0.5, -1.0);
    let mut group = c.benchmark_group("alpha_det");
    for n in [4usize, 7, 10] {
        let a = dk.matrix.view((0, 0), (n, n)).into_owned();
        for alpha in [-1.0, 0.5, 1.0] {
            group.bench_with_input(BenchmarkId::new(format!("alpha={alpha}"), n), &a, |b, a| {
                b.iter(|| alpha_det(black_box(a), alpha).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_fredholm(c: &mut Criterion) {
    let mut group = c.benchmark_group("fredholm_log_laplace");
    for scale in [8.0, 32.0] {
        let (dk, values) = gaussian_window(0.5 / std::f64::consts::PI.sqrt(), scale, 0.5, -1.0);
        let u = Complex64::new(0.3, 1.7);
        group.bench_with_input(BenchmarkId::from_parameter(dk.len()), &(dk, values), |b, (dk, v)| {
            b.iter(|| fredholm_log_laplace(dk, v, black_box(u), -1.0).unwrap())
        });
    }
    group.finish();
}

fn bench_winding(c: &mut Criterion) {
    let model = rademacher_sum(4);
    let opts = ScanOptions::default();
    c.bench_function("winding_number/cos4_r1.5", |b| {
        b.iter(|| winding_number(&model, black_box(1.5), &opts).unwrap())
    });
    c.bench_function("zero_free_radius/cos4_r3", |b| {
        b.iter(|| zero_free_radius(&model, black_box(3.0), 0.25, &opts).unwrap())
    });
}

fn bench_sample_dpp(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_dpp");
    for rank in [8usize, 32] {
        let dk = projection_window(rank, 1.0 / 64.0);
        group.bench_with_input(BenchmarkId::from_parameter(rank), &dk, |b, dk| {
            b.iter(|| sample_dpp_many(dk, 16, black_box(7)).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_alpha_det, bench_fredholm, bench_winding, bench_sample_dpp
}
criterion_main!(benches);
