//! Sequential against rayon execution for the parallel stages.
//!
//! Without the `parallel` feature both variants run sequentially, which
//! gives the baseline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use morsegrid::color::{self, ConversionMethod};
use morsegrid::morse::{self, TieBreak};
use morsegrid::{analyze, build_complex, Execution, GrayImage, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn relief(side: usize) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(side as u64);
    GrayImage::from_fn(side, side, |x, y| {
        let base = 96.0 + 64.0 * (x as f64 / 37.0).sin() * (y as f64 / 53.0).cos();
        (base + rng.random_range(0.0..64.0)) as u8
    })
    .unwrap()
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradient");
    group.sample_size(10);
    for side in [256, 512] {
        let k = build_complex(&relief(side));
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, side), &k, |b, k| {
                b.iter(|| morse::build_gradient_with(black_box(k), TieBreak::RowMajor, exec))
            });
        }
    }
    group.finish();
}

fn morse_complex(c: &mut Criterion) {
    let mut group = c.benchmark_group("morse_complex");
    group.sample_size(10);
    for side in [256, 512] {
        let k = build_complex(&relief(side));
        let g = morse::build_gradient(&k);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, side), &side, |b, _| {
                b.iter(|| morse::build_morse_complex_with(black_box(&g), &k, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn conversion(c: &mut Criterion) {
    let mut group = c.benchmark_group("to_gray");
    let img = RgbImage::from_fn(1024, 1024, |x, y| [x as u8, y as u8, (x ^ y) as u8]).unwrap();
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                color::to_gray_with(black_box(&img), &ConversionMethod::Luminosity, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn full_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    let img = relief(1000);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| analyze(black_box(&img), false, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gradient, morse_complex, conversion, full_pipeline);
criterion_main!(benches);
