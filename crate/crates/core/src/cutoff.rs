//! Smooth radial cutoff and the exterior-mass quadratures built on it.
//!
//! `rho(xi)` is 0 on `[0, 1]`, 1 on `[2, inf)` and the quintic bridge
//! `6s^5 - 15s^4 + 10s^3` (`s = xi - 1`) in between, so `rho'` and `rho''`
//! vanish at both ends. The weight applied at `x` is `rho(|x|^2 / k^2)`.

use crate::error::{Error, Result};
use crate::field::PhysicalField;

/// `sup |rho'|`, attained at `xi = 3/2`.
pub const C_RHO: f64 = 1.875;

pub fn rho(xi: f64) -> f64 {
    if xi <= 1.0 {
        0.0
    } else if xi >= 2.0 {
        1.0
    } else {
        let s = xi - 1.0;
        s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    }
}

pub fn rho_prime(xi: f64) -> f64 {
    if xi <= 1.0 || xi >= 2.0 {
        0.0
    } else {
        let s = xi - 1.0;
        30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

fn squared_radius(p: &PhysicalField, idx: (usize, usize, usize)) -> f64 {
    let g = &p.grid;
    let (x, y, z) = (g.coordinate(0, idx.0), g.coordinate(1, idx.1), g.coordinate(2, idx.2));
    x * x + y * y + z * z
}

/// Mass split of `|u|^2` relative to the ball of radius `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassPartition {
    /// `int rho(|x|^2/k^2) |u|^2`.
    pub tail: f64,
    /// Mass in `|x| < k`, where the weight vanishes.
    pub interior: f64,
    /// Mass in `k <= |x| <= sqrt(2) k`, where the weight is fractional.
    pub overlap: f64,
    pub total: f64,
}

/// The largest admissible radius for a box of side `length`.
pub fn max_radius(length: f64) -> f64 {
    length / 3.0
}

/// Partition with the box-validity check: `0 < k <= L/3`.
pub fn partition(p: &PhysicalField, k: f64) -> Result<MassPartition> {
    if !(k > 0.0) || k > max_radius(p.grid.length) * (1.0 + 1e-12) {
        return Err(Error::Range(format!(
            "cutoff radius {k} outside (0, L/3] for L = {}",
            p.grid.length
        )));
    }
    Ok(partition_unchecked(p, k))
}

/// Partition for any positive radius; beyond `L/3` the periodic images start to matter.
pub fn partition_unchecked(p: &PhysicalField, k: f64) -> MassPartition {
    let [n0, n1, n2] = p.grid.dims;
    let h3 = p.grid.cell_volume();
    let k2 = k * k;
    let mut out = MassPartition { tail: 0.0, interior: 0.0, overlap: 0.0, total: 0.0 };
    for i in 0..n0 {
        for j in 0..n1 {
            for l in 0..n2 {
                let idx = p.grid.index(i, j, l);
                let m = p.data[0][idx].powi(2) + p.data[1][idx].powi(2) + p.data[2][idx].powi(2);
                let xi = squared_radius(p, (i, j, l)) / k2;
                out.total += m;
                out.tail += rho(xi) * m;
                if xi < 1.0 {
                    out.interior += m;
                } else if xi <= 2.0 {
                    out.overlap += m;
                }
            }
        }
    }
    out.tail *= h3;
    out.interior *= h3;
    out.overlap *= h3;
    out.total *= h3;
    out
}

/// `int rho(|x|^2/k^2) |u|^2` by lattice quadrature.
pub fn weighted_mass(p: &PhysicalField, k: f64) -> Result<f64> {
    Ok(partition(p, k)?.tail)
}

/// Multiply `u` pointwise by `1 - rho(|x|^2/k^2)`.
pub fn flatten_weight(p: &PhysicalField, k: f64) -> Result<PhysicalField> {
    if !(k > 0.0) || k > max_radius(p.grid.length) * (1.0 + 1e-12) {
        return Err(Error::Range(format!("cutoff radius {k} outside (0, L/3]")));
    }
    let mut out = p.clone();
    let [n0, n1, n2] = p.grid.dims;
    for i in 0..n0 {
        for j in 0..n1 {
            for l in 0..n2 {
                let idx = p.grid.index(i, j, l);
                let w = 1.0 - rho(squared_radius(p, (i, j, l)) / (k * k));
                for c in 0..3 {
                    out.data[c][idx] *= w;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_is_c2_and_bounded() {
        assert_eq!(rho(1.0), 0.0);
        assert_eq!(rho(2.0), 1.0);
        assert!((rho(1.5) - 0.5).abs() < 1e-15);
        assert!((rho_prime(1.5) - C_RHO).abs() < 1e-15);
        let mut prev = 0.0;
        for n in 0..=1000 {
            let xi = 1.0 + n as f64 / 1000.0;
            let v = rho(xi);
            assert!(v >= prev - 1e-15);
            assert!(rho_prime(xi) <= C_RHO + 1e-12);
            prev = v;
        }
        // Finite-difference derivative agrees with the closed form.
        let h = 1e-6;
        for xi in [1.1, 1.3, 1.7, 1.95] {
            let fd = (rho(xi + h) - rho(xi - h)) / (2.0 * h);
            assert!((fd - rho_prime(xi)).abs() < 1e-7);
        }
    }
}
