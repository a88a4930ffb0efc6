use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use focklens::lens::{run_lens_group, LensParams, ProtocolSchedule, WindowPolicy};
use focklens::open_system::{physical_schedule, trajectory_evolve};
use focklens::optimize::curvature_guess;
use focklens::propagate::{displace, evolve_hamiltonian, DEFAULT_EVOLVE_TOL};
use focklens::state::{coherent_state, default_window};
use focklens::{Complex64, HamiltonianSpec};

const PHOTON_NUMBERS: [f64; 3] = [1e3, 1e4, 1e5];

fn coherent(n: f64) -> focklens::StateVector {
    coherent_state(Complex64::new(n.sqrt(), 0.0), default_window(n)).unwrap()
}

fn bench_coherent_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("coherent_state");
    for n in PHOTON_NUMBERS {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| coherent(black_box(n)))
        });
    }
    group.finish();
}

fn bench_displace(c: &mut Criterion) {
    let mut group = c.benchmark_group("displace");
    let beta = Complex64::new(0.3, -1.0);
    for n in PHOTON_NUMBERS {
        let state = coherent(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| displace(black_box(s), beta).unwrap())
        });
    }
    group.finish();
}

fn bench_evolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_kerr_and_drive");
    for n in PHOTON_NUMBERS {
        let state = coherent(n);
        let h = HamiltonianSpec {
            kerr: 1e-4,
            detuning: 1e-4 * (1.0 - 2.0 * n),
            ..HamiltonianSpec::drive(1.0, 0.0)
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| evolve_hamiltonian(black_box(s), &h, 0.5, DEFAULT_EVOLVE_TOL).unwrap())
        });
    }
    group.finish();
}

fn single_lens(n: f64) -> LensParams {
    let phi = curvature_guess(n);
    let tau = focklens::lens::focal_drive_time(n, 1.0, phi).unwrap();
    LensParams::new(phi, n, Complex64::new(0.0, -tau))
}

fn bench_lens_group(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_lens_group");
    let policy = WindowPolicy::default();
    for n in PHOTON_NUMBERS {
        let schedule = ProtocolSchedule::from_lenses(Complex64::new(n.sqrt(), 0.0), n as u64, &[single_lens(n); 3]);
        group.bench_with_input(BenchmarkId::from_parameter(n), &schedule, |b, s| {
            b.iter(|| run_lens_group(black_box(s), &policy).unwrap())
        });
    }
    group.finish();
}

fn bench_trajectory(c: &mut Criterion) {
    let mut group = c.benchmark_group("trajectory");
    group.sample_size(20);
    let n = 2500.0;
    let schedule = physical_schedule(Complex64::new(50.0, 0.0), 2500, &[single_lens(n)], 4.9e-3, 1.0).unwrap();
    let initial = coherent(n);
    for ratio in [10.0, 100.0] {
        let kappa = 4.9e-3 / ratio;
        group.bench_with_input(BenchmarkId::new("chi_over_kappa", ratio), &kappa, |b, &kappa| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                trajectory_evolve(&initial, &schedule, kappa, seed).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_coherent_state,
    bench_displace,
    bench_evolve,
    bench_lens_group,
    bench_trajectory
);
criterion_main!(benches);
