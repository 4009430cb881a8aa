//! Rayon fan-out against the sequential fallback on the two parallel loops
//! of the experiment: the oracle grid scan and the replication jobs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use otcrm::distortion::Distortion;
use otcrm::experiments::{conditional_sample, oracle_optimum, replicate, ModelKind, RunConfig};
use otcrm::par::Exec;

fn oracle_grid(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let ys = conditional_sample(&cfg, 10_000, 1).unwrap();
    let mut g = c.benchmark_group("oracle_grid");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| oracle_optimum(&Distortion::Square, &cfg.loss, &ys, 6, exec))
        });
    }
    g.finish();
}

fn replication(c: &mut Criterion) {
    let base = RunConfig {
        ns: vec![50],
        reps: 4,
        distortions: vec![Distortion::Square],
        models: vec![ModelKind::Saa, ModelKind::Csaa],
        mc_samples: 10_000,
        oracle_resolution: 3,
        ..RunConfig::default()
    };
    let mut g = c.benchmark_group("replicate");
    g.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let cfg = RunConfig { exec, ..base.clone() };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &cfg, |b, cfg| {
            b.iter(|| replicate(cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, oracle_grid, replication);
criterion_main!(benches);
