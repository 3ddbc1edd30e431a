//! Periodic box geometry.
//!
//! The box is `[-L/2, L/2)^3`, sampled at `x_j = -L/2 + j L / n` along each
//! axis. Fourier coefficients are taken relative to the lattice index, so a
//! field reads `u(x_j) = sum_k u_hat(k) exp(2 pi i m.j / n)` with `k = 2 pi m / L`.
//! With this normalization Parseval reads `||u||^2 = L^3 sum_k |u_hat(k)|^2`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub length: f64,
}

impl Grid {
    pub fn new(dims: [usize; 3], length: f64) -> Result<Self> {
        if dims.iter().any(|&n| n < 4 || !n.is_multiple_of(2)) {
            return Err(Error::Config(format!(
                "grid dimensions must be even and >= 4, got {dims:?}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dims, length })
    }

    pub fn cube(n: usize, length: f64) -> Result<Self> {
        Self::new([n, n, n], length)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + l
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length / self.dims[axis] as f64
    }

    /// 3/2-padded grid used for pointwise products.
    pub fn padded(&self) -> Grid {
        let p = |n: usize| {
            let m = 3 * n / 2;
            m + m % 2
        };
        Grid {
            dims: [p(self.dims[0]), p(self.dims[1]), p(self.dims[2])],
            length: self.length,
        }
    }

    /// Largest retained |m| per axis under the 2/3 rule (`3|m| < n`).
    pub fn band(&self) -> [usize; 3] {
        let b = |n: usize| (n - 1) / 3;
        [b(self.dims[0]), b(self.dims[1]), b(self.dims[2])]
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.dims == other.dims && self.length == other.length
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grid {:?} (L={}) vs {:?} (L={})",
                self.dims, self.length, other.dims, other.length
            )))
        }
    }

    /// Physical coordinate of lattice index `idx` along `axis`.
    #[inline]
    pub fn coordinate(&self, axis: usize, idx: usize) -> f64 {
        -0.5 * self.length + idx as f64 * self.spacing(axis)
    }

    /// Per-axis wavenumbers `2 pi m / L` in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.dims[axis];
        (0..n)
            .map(|i| 2.0 * PI * signed_mode(n, i) as f64 / self.length)
            .collect()
    }

    /// Per-axis flags for modes retained by the 2/3 rule.
    pub fn band_mask(&self, axis: usize) -> Vec<bool> {
        let n = self.dims[axis];
        (0..n).map(|i| 3 * (signed_mode(n, i).unsigned_abs() as usize) < n).collect()
    }

    /// Half-diagonal of the box: every point lies within this distance of the origin.
    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.length * 3f64.sqrt()
    }
}

/// Signed mode number of FFT index `idx` on an axis of length `n`.
#[inline]
pub fn signed_mode(n: usize, idx: usize) -> i64 {
    if idx <= n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// FFT index of signed mode `m` on an axis of length `n`.
#[inline]
pub fn mode_index(n: usize, m: i64) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Index of the mirrored mode `-m`.
#[inline]
pub fn neg_index(n: usize, idx: usize) -> usize {
    (n - idx) % n
}

/// Precomputed wavenumber tables for a grid.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    pub k: [Vec<f64>; 3],
    pub band: [Vec<bool>; 3],
}

impl Wavenumbers {
    pub fn new(grid: &Grid) -> Self {
        Self {
            k: [grid.wavenumbers(0), grid.wavenumbers(1), grid.wavenumbers(2)],
            band: [grid.band_mask(0), grid.band_mask(1), grid.band_mask(2)],
        }
    }

    #[inline]
    pub fn kvec(&self, i: usize, j: usize, l: usize) -> [f64; 3] {
        [self.k[0][i], self.k[1][j], self.k[2][l]]
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize, l: usize) -> bool {
        self.band[0][i] && self.band[1][j] && self.band[2][l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_follows_two_thirds_rule() {
        assert_eq!(Grid::cube(16, 1.0).unwrap().band(), [5, 5, 5]);
        assert_eq!(Grid::cube(32, 1.0).unwrap().band(), [10, 10, 10]);
        let g = Grid::cube(16, 1.0).unwrap();
        assert_eq!(g.band_mask(0).iter().filter(|b| **b).count(), 11);
        assert_eq!(g.padded().dims, [24, 24, 24]);
    }

    #[test]
    fn mode_roundtrip() {
        for n in [8usize, 16, 24] {
            for i in 0..n {
                assert_eq!(mode_index(n, signed_mode(n, i)), i);
            }
        }
    }

    #[test]
    fn rejects_odd_grids() {
        assert!(Grid::cube(15, 1.0).is_err());
        assert!(Grid::cube(16, 0.0).is_err());
    }

    #[test]
    fn origin_is_a_lattice_point() {
        let g = Grid::cube(16, 4.0).unwrap();
        assert_eq!(g.coordinate(0, 8), 0.0);
        assert_eq!(g.coordinate(0, 0), -2.0);
    }
}
