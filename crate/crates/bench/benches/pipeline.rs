use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dadl::ksvd::{ksvd_learn, KsvdConfig};
use dadl::pursuit::{default_residual_tol, normalize_columns, omp};
use dadl::synthgen::{generate, SynthSpec};
use dadl::{learn_base_dictionary, DadlConfig, Labels};
use nalgebra::{DMatrix, DVector};

/// Deterministic pseudo-random fill in `[-0.5, 0.5)`.
fn filled(rows: usize, cols: usize, salt: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| {
        let x = ((r * 131 + c * 17) as f64 * 0.618 + salt).sin() * 43758.5453;
        x - x.floor() - 0.5
    })
}

fn bench_omp(c: &mut Criterion) {
    let dict = normalize_columns(&filled(64, 144, 0.3)).0;
    let y: DVector<f64> = dict.column(5) * 1.5 - dict.column(77) * 0.7 + dict.column(130) * 0.2;
    c.bench_function("omp 64x144 t=4", |b| {
        b.iter(|| omp(black_box(&dict), black_box(&y), 4, default_residual_tol(&y)).unwrap())
    });
}

fn bench_ksvd(c: &mut Criterion) {
    let y = filled(16, 200, 1.1);
    let cfg = KsvdConfig::new(24, 3, 10, 1);
    c.bench_function("ksvd 16x200 K=24 t=3 10 iterations", |b| {
        b.iter(|| ksvd_learn(black_box(&y), &cfg).unwrap())
    });
}

fn bench_dadl(c: &mut Criterion) {
    let data = generate(&SynthSpec {
        n: 64,
        counts: (12, 5, 4),
        dims: (4, 12, 3),
        sparsity: (3, 4, 2),
        noise_sigma: 0.0,
        seed: 1,
    })
    .unwrap();
    let mut cfg: DadlConfig = data.truth.config.clone();
    cfg.seed = 1;
    let mut group = c.benchmark_group("dadl");
    group.sample_size(10);
    group.bench_function("learn 64px 12x5x4", |b| {
        b.iter(|| learn_base_dictionary(black_box(&data.grid), Labels::numbered(12, 5, 4), &cfg).unwrap())
    });
    let model = learn_base_dictionary(&data.grid, Labels::numbered(12, 5, 4), &cfg).unwrap();
    let coder = model.coder();
    let y = DVector::from_column_slice(data.grid.cell([3, 2, 1]));
    group.bench_function("decompose one image", |b| b.iter(|| coder.decompose(black_box(&y)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_omp, bench_ksvd, bench_dadl);
criterion_main!(benches);
