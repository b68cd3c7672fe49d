use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use geolab::convexity::midpoint_sweep;
use geolab::deck::octagon_group;
use geolab::experiments::{run_torus, ExperimentConfig, SampleCounts, SpaceConfig};
use geolab::model::ModelSpace;
use geolab::par::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn orbit_enumeration(c: &mut Criterion) {
    let g = octagon_group();
    let center = g.model().polar(0.8, 0.4);
    let mut group = c.benchmark_group("octagon_orbit_r7");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| g.orbit(g.base(), &center, 7.0, exec).unwrap().len())
        });
    }
    group.finish();
}

fn midpoints(c: &mut Criterion) {
    let h = ModelSpace::plane(-1.0).unwrap();
    let mut group = c.benchmark_group("midpoint_sweep_10k");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| midpoint_sweep(&h, 10_000, 3.0, 1e-9, 0, exec).violations)
        });
    }
    group.finish();
}

fn torus_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("torus_grid_20");
    group.sample_size(10);
    for (name, exec) in MODES {
        let cfg = ExperimentConfig {
            space: SpaceConfig::Lattice(vec![vec![1.0, 0.0], vec![0.35, 1.05]]),
            samples: SampleCounts {
                grid: 20,
                ..SampleCounts::default()
            },
            execution: exec,
            ..ExperimentConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_torus(&cfg).unwrap().passed)
        });
    }
    group.finish();
}

criterion_group!(benches, orbit_enumeration, midpoints, torus_grid);
criterion_main!(benches);
