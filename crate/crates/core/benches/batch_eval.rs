//! Batch scoring and DCV measurement on a single-thread pool versus the
//! default pool. Build with `--no-default-features` to time the purely
//! sequential code path instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ifacm::conformity::{fit_base_cm, BaseKind};
use ifacm::dataset::{gen_heteroscedastic, standardize, NoiseLaw};
use ifacm::ifacm::{measure_dcv, run_ifacm, IfacmConfig};
use rayon::ThreadPoolBuilder;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut out = vec![(
        "1-thread".to_string(),
        ThreadPoolBuilder::new().num_threads(1).build().unwrap(),
    )];
    if n > 1 {
        out.push((
            format!("{n}-thread"),
            ThreadPoolBuilder::new().num_threads(n).build().unwrap(),
        ));
    }
    out
}

fn batch(c: &mut Criterion) {
    let raw = gen_heteroscedastic(20_000, 3, NoiseLaw::ScaleMixture, 7).unwrap();
    let idx: Vec<usize> = (0..raw.len()).collect();
    let data = standardize(&raw, &idx).unwrap();
    let cm = fit_base_cm(BaseKind::Normalized, &data).unwrap();
    let mut cfg = IfacmConfig::new(0.1, 0.5);
    cfg.max_iters = 3;
    cfg.budget = 30;
    let layered = run_ifacm(&cm, &data, &cfg).unwrap().cm;

    let mut g = c.benchmark_group("batch");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("sheet", &name), |b| {
            b.iter(|| pool.install(|| layered.sheet(&data).unwrap()))
        });
        g.bench_function(BenchmarkId::new("measure_dcv", &name), |b| {
            b.iter(|| pool.install(|| measure_dcv(&layered, &data, 0.1, 1e-6).unwrap().dcv))
        });
    }
    g.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
