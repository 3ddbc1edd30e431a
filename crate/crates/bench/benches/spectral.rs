use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;

use cbf_core::dynamics::{NoiseCase, SimConfig};
use cbf_core::field::Nonlinear;
use cbf_core::forcing::{ForcingMode, ForcingProfile};
use cbf_core::integrator::{Drive, Integrator};
use cbf_core::ou::{ou_evaluate, WienerPath};
use cbf_core::{Grid, SpectralField};

const L: f64 = 4.0 * std::f64::consts::PI;

fn field(grid: Grid) -> SpectralField {
    SpectralField::random_solenoidal(grid, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 5.0)
}

fn nonlinear(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlinear_evaluate");
    for n in [16, 32] {
        let grid = Grid::cube(n, L).unwrap();
        let u = field(grid);
        let mut nl = Nonlinear::new(grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(nl.evaluate(&u, 3.0))));
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("if_rk2_step");
    for n in [16, 32] {
        let grid = Grid::cube(n, L).unwrap();
        let cfg = SimConfig { mu: 1.0, alpha: 1.0, beta: 1.0, r: 3.0, sigma: 1.0, case: NoiseCase::Multiplicative, g: None, grid, dt: 0.05 };
        let forcing = ForcingProfile::gaussian_curl(grid, 1.0, 1.5, 2, ForcingMode::ExpRelax).unwrap();
        let path = WienerPath::sample(3, -1.0, 1.0, 0.05).unwrap();
        let drive = Drive::new(ou_evaluate(&path, 1.0).unwrap(), 0.0, 3);
        let mut integ = Integrator::new(&cfg, &forcing).unwrap();
        let u = field(grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(integ.step(&u, 0.0, 0.05, &drive).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, nonlinear, step);
criterion_main!(benches);
