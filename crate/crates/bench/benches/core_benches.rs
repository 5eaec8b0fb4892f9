use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use givp_core::{
    bessel_j, constant_direction_check, simulate_unicycle, BesselControllerParams, BesselOrder, DirectionCheckConfig,
    IntegratorConfig, StateVector, ThetaRemapParams,
};
use givp_core::unicycle::unicycle_problem;

fn bessel(c: &mut Criterion) {
    let mut group = c.benchmark_group("bessel_j");
    for &(n, x) in &[(1u32, 0.5), (5, 3.0), (10, 20.0), (40, 100.0)] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_x{x}")), &(n, x), |b, &(n, x)| {
            b.iter(|| bessel_j(BesselOrder(black_box(n)), black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let ctrl = BesselControllerParams::default();
    let remap = ThetaRemapParams::default();
    let x0 = StateVector::new(vec![3.0, 4.0, 0.0]).unwrap();
    let mut group = c.benchmark_group("simulate_unicycle");
    group.sample_size(20);
    let fixed = IntegratorConfig::fixed(1e-3, 1.0);
    group.bench_function("rk4_fixed_t1", |b| {
        b.iter(|| simulate_unicycle(black_box(&x0), &ctrl, Some(&remap), &fixed).unwrap())
    });
    let adaptive = IntegratorConfig::adaptive(1e-9, 1e-12, 10.0);
    group.bench_function("rk45_adaptive_t10", |b| {
        b.iter(|| simulate_unicycle(black_box(&x0), &ctrl, Some(&remap), &adaptive).unwrap())
    });
    group.finish();
}

fn direction(c: &mut Criterion) {
    let problem = unicycle_problem(&BesselControllerParams::default(), None).unwrap();
    let center = StateVector::new(vec![0.0; 3]).unwrap();
    let mut group = c.benchmark_group("constant_direction_check");
    group.sample_size(10);
    for n in [256usize, 2048] {
        let cfg = DirectionCheckConfig {
            n_samples: n,
            ..DirectionCheckConfig::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &cfg, |b, cfg| {
            b.iter(|| constant_direction_check(|x| problem.field_at(x), &center, cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bessel, simulate, direction);
criterion_main!(benches);
