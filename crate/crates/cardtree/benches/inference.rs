use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cardtree::random::random_standard_model;
use cardtree::{convolve, marginals, sample, Backend};

fn bench_convolve(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("convolve");
    for &len in &[64usize, 256, 1024, 4096] {
        use rand::Rng;
        let a: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        group.bench_with_input(BenchmarkId::new("fft", len), &len, |bench, _| {
            bench.iter(|| convolve(&a, &b, Backend::Fft).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("naive", len), &len, |bench, _| {
            bench.iter(|| convolve(&a, &b, Backend::Naive).unwrap());
        });
    }
    group.finish();
}

fn bench_marginals_backends(c: &mut Criterion) {
    let mut group = c.benchmark_group("marginals");
    group.sample_size(10);
    for &d in &[256usize, 1024, 4096] {
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let model = random_standard_model(d, &mut rng);
        group.bench_with_input(BenchmarkId::new("hybrid", d), &d, |bench, _| {
            bench.iter(|| marginals(&model, Backend::Auto).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("naive", d), &d, |bench, _| {
            bench.iter(|| marginals(&model, Backend::Naive).unwrap());
        });
    }
    group.finish();
}

/// Sampling is the data-parallel hot path: compare the rayon pool against a
/// single-thread pool on the same workload (parallel feature builds only).
fn bench_parallel_vs_sequential(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_10k");
    group.sample_size(10);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = random_standard_model(512, &mut rng);

    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        group.bench_function("one_thread", |bench| {
            bench.iter(|| single.install(|| sample(&model, 5, 10_000).unwrap()));
        });
        group.bench_function("thread_pool", |bench| {
            bench.iter(|| sample(&model, 5, 10_000).unwrap());
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        group.bench_function("sequential", |bench| {
            bench.iter(|| sample(&model, 5, 10_000).unwrap());
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_convolve,
    bench_marginals_backends,
    bench_parallel_vs_sequential
);
criterion_main!(benches);
