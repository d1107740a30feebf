use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tradeoff::analysis::{scan_stationary_points, GridSpec};
use tradeoff::exec::{trace_batch, Exec, TraceJob};
use tradeoff::problem::{Example1Problem, SineSum};
use tradeoff::tracer::TraceConfig;

fn jobs(count: usize) -> Vec<TraceJob> {
    (0..count)
        .map(|i| {
            let t = i as f64 / count as f64;
            let ex = Example1Problem::new(1.0 + 2.0 * t, 1.0, 1.0 - t, 0.5 + t);
            TraceJob {
                pair: ex.pair(),
                start: ex.h_cio(),
                config: TraceConfig::default(),
            }
        })
        .collect()
}

fn traces(c: &mut Criterion) {
    let batch = jobs(32);
    let mut group = c.benchmark_group("trace_batch");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| trace_batch(&batch, exec))
        });
    }
    group.finish();
}

fn scans(c: &mut Criterion) {
    let field = SineSum {
        freqs: vec![1.0, 2.0, 3.0],
    };
    let grid = GridSpec {
        lower: vec![-3.0; 3],
        upper: vec![3.0; 3],
        per_axis: 16,
    };
    let mut group = c.benchmark_group("scan_stationary_points");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| scan_stationary_points(&field, &grid, 1e-10, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, traces, scans);
criterion_main!(benches);
