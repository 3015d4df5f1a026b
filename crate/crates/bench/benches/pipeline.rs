//! Benchmarks along the per-tick hot path: allocation frame updates, the
//! minimum-norm force solve, the internal-force parameter search (warm and
//! cold), and a short end-to-end closed-loop run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use skyhaul_core::allocation::{grasp_matrix, right_pseudoinverse, AllocationTracker};
use skyhaul_core::optimizer::optimize;
use skyhaul_core::sim::run_closed_loop;
use skyhaul_core::{Vec3, Vec6};

fn bench_allocation(c: &mut Criterion) {
    let geom = skyhaul_bench::reference_geometry();
    let attitude = skyhaul_bench::tilted_attitude();
    let omega = Vec3::new(0.2, -0.1, 0.4);
    let dt = 5e-3;

    c.bench_function("allocation/tracked_frame", |b| {
        let mut tracker = AllocationTracker::new();
        let mut t = 0.0;
        tracker
            .frame(&attitude, &omega, &geom, t, dt)
            .expect("frame builds");
        b.iter(|| {
            t += dt;
            let frame = tracker
                .frame(black_box(&attitude), &omega, &geom, t, dt)
                .expect("frame builds");
            black_box(frame.nullspace.ncols())
        })
    });

    c.bench_function("allocation/min_norm_solve", |b| {
        let g = grasp_matrix(&attitude, &geom);
        let wrench = Vec6::new(
            0.3,
            -0.2,
            geom.load_mass() * geom.gravity(),
            0.05,
            -0.02,
            0.01,
        );
        b.iter(|| black_box(right_pseudoinverse(black_box(&g)).expect("full row rank") * wrench))
    });
}

fn bench_optimizer(c: &mut Criterion) {
    let (params, snapshot, weights) = skyhaul_bench::optimizer_instance();

    c.bench_function("optimizer/warm_start", |b| {
        // The reference parameters are feasible at this snapshot, so each call
        // exits after a single constraint evaluation.
        let outcome = optimize(&params, &snapshot, &weights, 41, 24);
        assert!(outcome.feasible && outcome.evaluations == 1);
        b.iter(|| black_box(optimize(&params, &snapshot, &weights, 41, 24)))
    });

    c.bench_function("optimizer/cold_search", |b| {
        // Zero amplitude stops every carrier, so each call pays for the full
        // lattice sweep plus the local polish.
        let mut cold = params.clone();
        cold.amplitude = 0.0;
        let outcome = optimize(&cold, &snapshot, &weights, 41, 24);
        assert!(outcome.evaluations > 1000);
        b.iter(|| black_box(optimize(&cold, &snapshot, &weights, 41, 24)))
    });
}

fn bench_closed_loop(c: &mut Criterion) {
    let config = skyhaul_bench::short_scenario();
    let mut group = c.benchmark_group("closed_loop");
    group.sample_size(20);
    group.bench_function("one_second_flight", |b| {
        b.iter(|| {
            let run = run_closed_loop(black_box(&config)).expect("scenario is valid");
            assert!(run.is_complete());
            black_box(run.trace.rows.len())
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_allocation,
    bench_optimizer,
    bench_closed_loop
);
criterion_main!(benches);
