//! Sequential versus rayon engine throughput.
//!
//! Run with `cargo bench -p bellfake`. Building with
//! `--no-default-features` benches the sequential path alone.

use std::f64::consts::SQRT_2;

use bellfake::engine::run_sequential;
use bellfake::strategies::{ImprovedModelSpec, PerfectMode, PerfectModelSpec};
use bellfake::{MeasurementSettings, RunConfig, Strategy};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

const TRIALS: u64 = 1 << 20;

fn configs() -> Vec<(&'static str, RunConfig)> {
    let settings = MeasurementSettings::standard();
    let (a, b) = (12.0 * SQRT_2 - 16.0, 40.0 - 28.0 * SQRT_2);
    let perfect = |mode| {
        let spec = PerfectModelSpec::new(a, b, mode, true).expect("valid spec");
        RunConfig::new(Strategy::Perfect(spec), settings, TRIALS, 1).expect("valid config")
    };
    let improved = ImprovedModelSpec::new(0.2612, &settings, None).expect("valid spec");
    vec![
        ("perfect-analytic", perfect(PerfectMode::Analytic)),
        ("perfect-physical", perfect(PerfectMode::Physical)),
        (
            "improved",
            RunConfig::new(Strategy::Improved(improved), settings, TRIALS, 1).expect("valid config"),
        ),
    ]
}

fn engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    group.throughput(Throughput::Elements(TRIALS));
    for (name, config) in configs() {
        group.bench_with_input(BenchmarkId::new("sequential", name), &config, |bench, cfg| {
            bench.iter(|| run_sequential(cfg).expect("run succeeds"))
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", name), &config, |bench, cfg| {
            bench.iter(|| bellfake::engine::run_parallel(cfg).expect("run succeeds"))
        });
    }
    group.finish();
}

criterion_group!(benches, engine);
criterion_main!(benches);
