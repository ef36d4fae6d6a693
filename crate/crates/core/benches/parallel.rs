//! Multi-threaded versus single-threaded timings of the data-parallel kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semaxes_core::axes::{covariance, fit_whitening, predicted_offtarget, Sign};
use semaxes_core::{feature_correlation_matrix, project, EmbeddingSpace, FeatureDirection};

fn setup(n: usize, dim: usize, k: usize) -> (EmbeddingSpace, Vec<FeatureDirection>) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = (0..n)
        .map(|i| (format!("t{i}"), (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f32>>()))
        .collect();
    let dirs = (0..k)
        .map(|i| {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            FeatureDirection::from_vector(format!("f{i}"), v).unwrap()
        })
        .collect();
    (EmbeddingSpace::from_rows(rows).unwrap(), dirs)
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("rayon", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("single", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn kernels(c: &mut Criterion) {
    let (space, dirs) = setup(20_000, 128, 28);
    let ids: Vec<usize> = (0..space.len()).collect();
    let table = project(&space, &ids, &dirs).unwrap();

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_with_input(BenchmarkId::new("project", name), &pool, |b, p| {
            b.iter(|| p.install(|| black_box(project(&space, &ids, &dirs).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("covariance", name), &pool, |b, p| {
            b.iter(|| p.install(|| black_box(covariance(&space).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("fit_whitening", name), &pool, |b, p| {
            b.iter(|| p.install(|| black_box(fit_whitening(&space).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("correlation_matrix", name), &pool, |b, p| {
            b.iter(|| p.install(|| black_box(feature_correlation_matrix(&table).unwrap())))
        });
        g.bench_with_input(BenchmarkId::new("predicted_offtarget", name), &pool, |b, p| {
            b.iter(|| p.install(|| black_box(predicted_offtarget(&dirs, 0, &space, &ids[..2000], Sign::Positive, 0.35).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
