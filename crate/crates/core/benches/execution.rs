use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pamctl::harness::{run_repeats, run_sweep, SweepMode};
use pamctl::signal::{ReferenceSpec, Sinusoid};
use pamctl::{ControllerKind, Execution, RunConfig};

// two periods keep one iteration short while still exercising the full loop
fn short_config() -> RunConfig {
    let s = Sinusoid::new(30.0, 20.0, 4.0, 2);
    RunConfig {
        duration: s.duration(),
        reference: ReferenceSpec::Sinusoid(s),
        repeats: 5,
        ..RunConfig::default()
    }
}

fn repeats(c: &mut Criterion) {
    let config = short_config();
    let mut group = c.benchmark_group("repeats");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| run_repeats(&config, exec).unwrap()),
        );
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let config = RunConfig {
        repeats: 2,
        ..short_config()
    };
    let mut group = c.benchmark_group("period_sweep");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| {
                b.iter(|| {
                    run_sweep(
                        &config,
                        SweepMode::Frequency,
                        &[4.0, 2.0],
                        &ControllerKind::ALL,
                        exec,
                    )
                    .unwrap()
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, repeats, sweep);
criterion_main!(benches);
