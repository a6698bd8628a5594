// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dynloc::exec::Execution;
use dynloc::floquet::{self, DriveFamily};
use dynloc::sweeps::{self, GammaRange, SweepPlan};

fn scan(c: &mut Criterion) {
    let family = DriveFamily::sinusoidal(1.0).unwrap();
    let grid = floquet::gamma_grid(0.0, 8.0, 0.02).unwrap();
    let settings = floquet::monodromy_settings();
    let mut group = c.benchmark_group("monodromy_scan");
    group.sample_size(10);
    for execution in [Execution::Serial, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &execution, |b, &e| {
            b.iter(|| floquet::scan(&family, &grid, &settings, e).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("quasi_energy_sweep");
    group.sample_size(10);
    for execution in [Execution::Serial, Execution::Parallel] {
        let plan = SweepPlan {
            execution,
            ..SweepPlan::new(vec![5.0, 1.0], GammaRange::new(0.0, 6.0, 0.02).unwrap()).unwrap()
        };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &plan, |b, plan| {
            b.iter(|| sweeps::run_quasi_energy_sweep(plan).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scan, sweep);
criterion_main!(benches);
