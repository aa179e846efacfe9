use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mtdr::simulation::{generate_replication, ScenarioSpec};
use mtdr::{fit, Execution, FitConfig};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn data(n: usize, t: usize) -> mtdr::simulation::GeneratedData {
    let spec = ScenarioSpec {
        t,
        seed: 1,
        ..ScenarioSpec::single(0.5, n, 200).unwrap()
    };
    generate_replication(&spec, 0).unwrap()
}

/// A fixed number of outer iterations, so both modes do the same work.
fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_10_iterations");
    group.sample_size(10);
    for n in [50, 200] {
        let d = data(n, 500);
        for (name, execution) in MODES {
            let cfg = FitConfig {
                t: 500,
                max_outer_iter: 10,
                rel_tol: 0.0,
                execution,
                ..FitConfig::default()
            };
            group.bench_with_input(BenchmarkId::new(name, n), &d, |b, d| {
                b.iter(|| fit(black_box(&d.train), 1, d.truth.reference(), &cfg, None).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_risk(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_risk");
    let d = data(200, 1000);
    for (name, execution) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                d.truth
                    .empirical_risk_with(black_box(&d.train), execution)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_risk);
criterion_main!(benches);
