use criterion::{criterion_group, criterion_main, Criterion};
use heleshaw::lattice::{
    run_divisible_sandpile, run_idla, run_rotor_router, BoundaryCondition, RotorInit,
};
use heleshaw::shape::outer_contour;
use std::hint::black_box;

fn bench_walk_models(c: &mut Criterion) {
    let mut g = c.benchmark_group("aggregation");
    g.sample_size(10);
    g.bench_function("idla_none_2000", |bench| {
        bench.iter(|| run_idla(2000, BoundaryCondition::None, black_box(1)).unwrap())
    });
    g.bench_function("idla_kill_neg_axis_2000", |bench| {
        bench.iter(|| run_idla(2000, BoundaryCondition::KillNegAxis, black_box(1)).unwrap())
    });
    g.bench_function("rotor_none_2000", |bench| {
        bench.iter(|| {
            run_rotor_router(2000, BoundaryCondition::None, RotorInit::AllNorth).unwrap()
        })
    });
    g.bench_function("sandpile_mass_500", |bench| {
        bench.iter(|| run_divisible_sandpile(500.0, BoundaryCondition::None, 1e-6).unwrap())
    });
    g.finish();
}

fn bench_contour(c: &mut Criterion) {
    let cluster = run_idla(20_000, BoundaryCondition::KillNegAxis, 3).unwrap();
    c.bench_function("outer_contour_20k", |bench| {
        bench.iter(|| outer_contour(black_box(cluster.sites())).unwrap())
    });
}

criterion_group!(benches, bench_walk_models, bench_contour);
criterion_main!(benches);
