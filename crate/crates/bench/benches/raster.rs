use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use veil_bench::{ellipse_mask, polygon};
use veil_core::raster::{dilate_mask, rasterize_contour};

fn rasterize(c: &mut Criterion) {
    let mut g = c.benchmark_group("rasterize_1024");
    for n in [8usize, 64, 512] {
        let poly = polygon(1024, 1024, n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &poly, |b, p| {
            b.iter(|| rasterize_contour(black_box(p), 1024, 1024).unwrap())
        });
    }
    g.finish();
}

fn dilate(c: &mut Criterion) {
    let mask = ellipse_mask(1024, 1024);
    c.bench_function("dilate_1024_r2", |b| b.iter(|| dilate_mask(black_box(&mask), 2)));
}

criterion_group!(benches, rasterize, dilate);
criterion_main!(benches);
