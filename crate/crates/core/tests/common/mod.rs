#![allow(dead_code)]

use cbf_core::dynamics::{NoiseCase, SimConfig};
use cbf_core::integrator::Drive;
use cbf_core::ou::{OUState, WienerPath};
use cbf_core::{Grid, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const L: f64 = 4.0 * std::f64::consts::PI;

pub fn grid(n: usize) -> Grid {
    Grid::cube(n, L).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn field(grid: Grid, seed: u64, norm: f64) -> SpectralField {
    SpectralField::random_solenoidal(grid, &mut rng(seed), norm)
}

pub fn cfg(n: usize, case: NoiseCase) -> SimConfig {
    SimConfig { mu: 1.0, alpha: 1.0, beta: 1.0, r: 3.0, sigma: 1.0, case, g: None, grid: grid(n), dt: 0.05 }
}

/// `y == 0` on `[t_min, t_max]`.
pub fn quiet_drive(t_min: f64, t_max: f64) -> Drive {
    let path = WienerPath::sample(1, t_min, t_max, 0.05).unwrap();
    Drive::new(OUState::zero(&path, 1.0), 0.0, 1)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
