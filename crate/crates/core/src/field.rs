//! Velocity fields in Fourier space and the operators acting on them.
//!
//! A [`SpectralField`] stores the three Cartesian components as full `n^3`
//! coefficient arrays in FFT order (see [`crate::grid`] for the normalization).
//! Fields produced by the solver are confined to the 2/3 band; pointwise
//! products are formed on the 3/2-padded grid and truncated back.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::cutoff;
use crate::error::{Error, Result};
use crate::fft::with_fft;
use crate::grid::{mode_index, neg_index, signed_mode, Grid, Wavenumbers};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Real vector field sampled on the lattice.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub grid: Grid,
    pub data: [Vec<f64>; 3],
}

impl PhysicalField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, data: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        let [n0, n1, n2] = grid.dims;
        for i in 0..n0 {
            let x = grid.coordinate(0, i);
            for j in 0..n1 {
                let y = grid.coordinate(1, j);
                for l in 0..n2 {
                    let z = grid.coordinate(2, l);
                    let v = f([x, y, z]);
                    let idx = grid.index(i, j, l);
                    for c in 0..3 {
                        out.data[c][idx] = v[c];
                    }
                }
            }
        }
        out
    }

    /// Pointwise squared magnitude.
    pub fn magnitude_sq(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.data[0][i].powi(2) + self.data[1][i].powi(2) + self.data[2][i].powi(2))
            .collect()
    }

    /// Riemann-sum quadrature of `sum_x |u(x)|^p dx`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        let h3 = self.grid.cell_volume();
        self.magnitude_sq().iter().map(|m| m.powf(0.5 * p)).sum::<f64>() * h3
    }

    pub fn max_speed(&self) -> f64 {
        self.magnitude_sq().iter().fold(0.0f64, |a, &b| a.max(b)).sqrt()
    }
}

/// Scalar field in Fourier space (pressure, potentials).
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, coeffs: vec![Complex64::default(); grid.len()] }
    }

    pub fn from_values(grid: Grid, values: &[f64]) -> Self {
        let coeffs = real_forward(&grid, values);
        Self { grid, coeffs }
    }

    pub fn to_physical(&self) -> Vec<f64> {
        real_inverse(&self.grid, &self.coeffs)
    }

    pub fn gradient(&self) -> SpectralField {
        let wn = Wavenumbers::new(&self.grid);
        let mut out = SpectralField::zeros(self.grid);
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            for c in 0..3 {
                out.c[c][idx] = I * k[c] * self.coeffs[idx];
            }
        });
        out
    }

    pub fn norm(&self) -> f64 {
        (self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Divergence-free (or general) vector field stored as Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    pub(crate) c: [Vec<Complex64>; 3],
}

/// Norms of a velocity field used throughout the estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldNorms {
    pub h_norm: f64,
    pub grad_norm: f64,
    pub v_norm: f64,
    /// `||u||_{L^{r+1}}`.
    pub lp_norm: f64,
    /// `None` when the mean mode is nonzero.
    pub h_minus1_norm: Option<f64>,
    pub tail_norm: f64,
    /// `||u||_{L^{3(r+1)}}`.
    pub l3rp1_norm: f64,
}

pub(crate) fn for_each_mode(grid: &Grid, mut f: impl FnMut(usize, usize, usize, usize)) {
    let [n0, n1, n2] = grid.dims;
    let mut idx = 0;
    for i in 0..n0 {
        for j in 0..n1 {
            for l in 0..n2 {
                f(idx, i, j, l);
                idx += 1;
            }
        }
    }
}

fn real_forward(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let scale = 1.0 / grid.len() as f64;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    with_fft(grid.dims, |fft| fft.forward(&mut buf));
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

fn real_inverse(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    with_fft(grid.dims, |fft| fft.inverse(&mut buf));
    buf.iter().map(|c| c.re).collect()
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        let z = Complex64::default();
        Self { grid, c: [vec![z; n], vec![z; n], vec![z; n]] }
    }

    pub fn from_components(grid: Grid, c: [Vec<Complex64>; 3]) -> Result<Self> {
        if c.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::Shape(format!(
                "expected {} coefficients per component",
                grid.len()
            )));
        }
        Ok(Self { grid, c })
    }

    pub fn from_physical(p: &PhysicalField) -> Self {
        let grid = p.grid;
        Self {
            grid,
            c: [
                real_forward(&grid, &p.data[0]),
                real_forward(&grid, &p.data[1]),
                real_forward(&grid, &p.data[2]),
            ],
        }
    }

    /// Sample `f` on the lattice and transform; no band truncation is applied.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        Self::from_physical(&PhysicalField::from_fn(grid, f))
    }

    pub fn to_physical(&self) -> PhysicalField {
        PhysicalField {
            grid: self.grid,
            data: [
                real_inverse(&self.grid, &self.c[0]),
                real_inverse(&self.grid, &self.c[1]),
                real_inverse(&self.grid, &self.c[2]),
            ],
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.c[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.c[c]
    }

    pub fn into_components(self) -> [Vec<Complex64>; 3] {
        self.c
    }

    /// Coefficient vector at FFT index triple.
    pub fn mode(&self, i: usize, j: usize, l: usize) -> [Complex64; 3] {
        let idx = self.grid.index(i, j, l);
        [self.c[0][idx], self.c[1][idx], self.c[2][idx]]
    }

    pub fn set_mode(&mut self, i: usize, j: usize, l: usize, v: [Complex64; 3]) {
        let idx = self.grid.index(i, j, l);
        for c in 0..3 {
            self.c[c][idx] = v[c];
        }
    }

    /// Real-valued plane wave `a cos(k.x) + b sin(k.x)` for signed mode `m`.
    pub fn plane_wave(grid: Grid, m: [i64; 3], a: [f64; 3], b: [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        // The lattice starts at -L/2, so exp(i k.x) picks up (-1)^(m_x+m_y+m_z).
        let parity = if (m[0] + m[1] + m[2]).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let idx_p = [0, 1, 2].map(|d| mode_index(grid.dims[d], m[d]));
        let idx_n = [0, 1, 2].map(|d| mode_index(grid.dims[d], -m[d]));
        let p = grid.index(idx_p[0], idx_p[1], idx_p[2]);
        let n = grid.index(idx_n[0], idx_n[1], idx_n[2]);
        for c in 0..3 {
            let half = Complex64::new(a[c], -b[c]) * 0.5 * parity;
            if p == n {
                out.c[c][p] += Complex64::new(a[c] * parity, 0.0);
            } else {
                out.c[c][p] += half;
                out.c[c][n] += half.conj();
            }
        }
        out
    }

    /// Random real solenoidal field in the 2/3 band with `||u|| = norm`.
    pub fn random_solenoidal<R: Rng + ?Sized>(grid: Grid, rng: &mut R, norm: f64) -> Self {
        let wn = Wavenumbers::new(&grid);
        let mut out = Self::zeros(grid);
        for_each_mode(&grid, |idx, i, j, l| {
            if !wn.in_band(i, j, l) {
                return;
            }
            let k = wn.kvec(i, j, l);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let env = 1.0 / (1.0 + k2);
            for c in 0..3 {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                out.c[c][idx] = Complex64::new(re, im) * env;
            }
        });
        out.enforce_hermitian();
        out.dealias();
        let mut out = out.leray_project();
        let cur = out.norm();
        if cur > 0.0 {
            out.scale_mut(norm / cur);
        }
        out
    }

    /// Symmetrize so that the physical field is real.
    pub fn enforce_hermitian(&mut self) {
        let [n0, n1, n2] = self.grid.dims;
        for comp in self.c.iter_mut() {
            let src = comp.clone();
            for i in 0..n0 {
                let ni = neg_index(n0, i);
                for j in 0..n1 {
                    let nj = neg_index(n1, j);
                    for l in 0..n2 {
                        let nl = neg_index(n2, l);
                        let a = src[(i * n1 + j) * n2 + l];
                        let b = src[(ni * n1 + nj) * n2 + nl];
                        comp[(i * n1 + j) * n2 + l] = 0.5 * (a + b.conj());
                    }
                }
            }
        }
    }

    /// Largest violation of `u(-k) = conj u(k)`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let [n0, n1, n2] = self.grid.dims;
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for comp in &self.c {
            for i in 0..n0 {
                for j in 0..n1 {
                    for l in 0..n2 {
                        let a = comp[(i * n1 + j) * n2 + l];
                        let b = comp[(neg_index(n0, i) * n1 + neg_index(n1, j)) * n2 + neg_index(n2, l)];
                        worst = worst.max((a - b.conj()).norm());
                        scale = scale.max(a.norm());
                    }
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Zero every coefficient outside the 2/3 band.
    pub fn dealias(&mut self) {
        let wn = Wavenumbers::new(&self.grid);
        let grid = self.grid;
        for comp in self.c.iter_mut() {
            for_each_mode(&grid, |idx, i, j, l| {
                if !wn.in_band(i, j, l) {
                    comp[idx] = Complex64::default();
                }
            });
        }
    }

    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias();
        out
    }

    pub fn is_band_limited(&self) -> bool {
        let wn = Wavenumbers::new(&self.grid);
        let mut ok = true;
        for comp in &self.c {
            for_each_mode(&self.grid, |idx, i, j, l| {
                if !wn.in_band(i, j, l) && comp[idx] != Complex64::default() {
                    ok = false;
                }
            });
        }
        ok
    }

    /// `(I - k k^T / |k|^2) u_hat` for `k != 0`; identity on the mean.
    pub fn leray_project(&self) -> Self {
        let wn = Wavenumbers::new(&self.grid);
        let mut out = self.clone();
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                return;
            }
            let kd = (k[0] * self.c[0][idx] + k[1] * self.c[1][idx] + k[2] * self.c[2][idx]) / k2;
            for c in 0..3 {
                out.c[c][idx] = self.c[c][idx] - kd * k[c];
            }
        });
        out
    }

    /// Largest `|k.u(k)| / |u(k)|` over nonzero modes.
    pub fn divergence_defect(&self) -> f64 {
        let wn = Wavenumbers::new(&self.grid);
        let mut worst = 0.0f64;
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kn == 0.0 {
                return;
            }
            let u = [self.c[0][idx], self.c[1][idx], self.c[2][idx]];
            let un = (u[0].norm_sqr() + u[1].norm_sqr() + u[2].norm_sqr()).sqrt();
            if un > 0.0 {
                let kd = k[0] * u[0] + k[1] * u[1] + k[2] * u[2];
                worst = worst.max(kd.norm() / (kn * un));
            }
        });
        worst
    }

    pub fn is_solenoidal(&self) -> bool {
        self.divergence_defect() <= 1e-12
    }

    /// Stokes operator: multiply every coefficient by `|k|^2`.
    pub fn stokes_apply(&self) -> Self {
        let wn = Wavenumbers::new(&self.grid);
        let mut out = self.clone();
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            for c in 0..3 {
                out.c[c][idx] *= k2;
            }
        });
        out
    }

    pub fn divergence(&self) -> ScalarField {
        let wn = Wavenumbers::new(&self.grid);
        let mut out = ScalarField::zeros(self.grid);
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            out.coeffs[idx] =
                I * (k[0] * self.c[0][idx] + k[1] * self.c[1][idx] + k[2] * self.c[2][idx]);
        });
        out
    }

    /// Curl `i k x u_hat`.
    pub fn curl(&self) -> Self {
        let wn = Wavenumbers::new(&self.grid);
        let mut out = Self::zeros(self.grid);
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            let u = [self.c[0][idx], self.c[1][idx], self.c[2][idx]];
            out.c[0][idx] = I * (k[1] * u[2] - k[2] * u[1]);
            out.c[1][idx] = I * (k[2] * u[0] - k[0] * u[2]);
            out.c[2][idx] = I * (k[0] * u[1] - k[1] * u[0]);
        });
        out
    }

    /// Spectral derivative of component `comp` along `axis`.
    pub fn derivative(&self, comp: usize, axis: usize) -> Vec<Complex64> {
        let k = self.grid.wavenumbers(axis);
        let grid = self.grid;
        let mut out = self.c[comp].clone();
        for_each_mode(&grid, |idx, i, j, l| {
            let kk = k[[i, j, l][axis]];
            out[idx] *= I * kk;
        });
        out
    }

    pub fn scale_mut(&mut self, a: f64) {
        for comp in self.c.iter_mut() {
            comp.iter_mut().for_each(|x| *x *= a);
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for c in 0..3 {
            for (x, y) in self.c[c].iter_mut().zip(&other.c[c]) {
                *x += a * y;
            }
        }
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// L^2 inner product via Parseval.
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let mut acc = 0.0;
        for c in 0..3 {
            for (a, b) in self.c[c].iter().zip(&other.c[c]) {
                acc += a.re * b.re + a.im * b.im;
            }
        }
        Ok(acc * self.grid.volume())
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.volume()
            * self.c.iter().flat_map(|v| v.iter()).map(|x| x.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `sum_k w(|k|^2) |u_hat(k)|^2 L^3`.
    pub fn weighted_norm_sq(&self, w: impl Fn(f64) -> f64) -> f64 {
        let wn = Wavenumbers::new(&self.grid);
        let mut acc = 0.0;
        for_each_mode(&self.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let m = self.c[0][idx].norm_sqr() + self.c[1][idx].norm_sqr() + self.c[2][idx].norm_sqr();
            if m > 0.0 {
                acc += w(k2) * m;
            }
        });
        acc * self.grid.volume()
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.weighted_norm_sq(|k2| k2)
    }

    /// `||A u||^2`.
    pub fn stokes_norm_sq(&self) -> f64 {
        self.weighted_norm_sq(|k2| k2 * k2)
    }

    pub fn mean(&self) -> [Complex64; 3] {
        [self.c[0][0], self.c[1][0], self.c[2][0]]
    }

    /// `(L^3 sum_{k != 0} |u_hat|^2 / |k|^2)^{1/2}`; requires a mean-free field.
    pub fn h_minus1_norm(&self) -> Result<f64> {
        let m = self.mean();
        let mn = (m[0].norm_sqr() + m[1].norm_sqr() + m[2].norm_sqr()).sqrt();
        if mn > 1e-14 * self.norm().max(f64::MIN_POSITIVE) && mn > 0.0 {
            return Err(Error::Domain(format!(
                "negative Sobolev norm needs a mean-free field (|u_hat(0)| = {mn:e})"
            )));
        }
        Ok(self.weighted_norm_sq(|k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 }).sqrt())
    }

    /// Copy into a grid of different resolution, keeping coefficients whose
    /// modes exist on both grids (Nyquist modes are dropped).
    pub fn resample(&self, target: Grid) -> Result<Self> {
        if target.length != self.grid.length {
            return Err(Error::Shape("resampling requires equal box length".into()));
        }
        let mut out = Self::zeros(target);
        let s = self.grid.dims;
        let t = target.dims;
        let lim = [0, 1, 2].map(|d| (s[d].min(t[d]) / 2) as i64 - 1);
        for_each_mode(&self.grid, |idx, i, j, l| {
            let m = [signed_mode(s[0], i), signed_mode(s[1], j), signed_mode(s[2], l)];
            if (0..3).any(|d| m[d].abs() > lim[d]) {
                return;
            }
            let ti = target.index(
                mode_index(t[0], m[0]),
                mode_index(t[1], m[1]),
                mode_index(t[2], m[2]),
            );
            for c in 0..3 {
                out.c[c][ti] = self.c[c][idx];
            }
        });
        Ok(out)
    }
}

/// Transforms between band-limited fields and the 3/2-padded lattice.
///
/// Inverse transforms pack two real fields into one complex transform; the
/// forward direction separates them using Hermitian symmetry.
pub struct Padder {
    base: Grid,
    pad: Grid,
    /// Base index -> padded index for every band mode, `None` outside the band.
    map: [Vec<Option<usize>>; 3],
    mask: [Vec<bool>; 3],
    buf: Vec<Complex64>,
}

impl Padder {
    pub fn new(base: Grid) -> Self {
        let pad = base.padded();
        let bw = base.band();
        let map = [0, 1, 2].map(|d| {
            let n = base.dims[d];
            (0..n)
                .map(|i| {
                    let m = signed_mode(n, i);
                    (m.unsigned_abs() as usize <= bw[d]).then(|| mode_index(pad.dims[d], m))
                })
                .collect::<Vec<_>>()
        });
        let mask = [0, 1, 2].map(|d| {
            let n = pad.dims[d];
            (0..n).map(|i| signed_mode(n, i).unsigned_abs() as usize <= bw[d]).collect()
        });
        Self { base, pad, map, mask, buf: vec![Complex64::default(); pad.len()] }
    }

    pub fn base(&self) -> &Grid {
        &self.base
    }

    pub fn padded(&self) -> &Grid {
        &self.pad
    }

    fn scatter(&mut self, a: &[Complex64], b: Option<&[Complex64]>) {
        self.buf.iter_mut().for_each(|x| *x = Complex64::default());
        let [n0, n1, n2] = self.base.dims;
        let [_, p1, p2] = self.pad.dims;
        for i in 0..n0 {
            let Some(pi) = self.map[0][i] else { continue };
            for j in 0..n1 {
                let Some(pj) = self.map[1][j] else { continue };
                for l in 0..n2 {
                    let Some(pl) = self.map[2][l] else { continue };
                    let src = (i * n1 + j) * n2 + l;
                    let dst = (pi * p1 + pj) * p2 + pl;
                    self.buf[dst] = match b {
                        Some(b) => a[src] + I * b[src],
                        None => a[src],
                    };
                }
            }
        }
    }

    fn inverse_buf(&mut self) {
        let mask = &self.mask;
        let buf = &mut self.buf;
        with_fft(self.pad.dims, |fft| fft.inverse_band(buf, [&mask[0], &mask[1], &mask[2]]));
    }

    fn forward_buf(&mut self) {
        let mask = &self.mask;
        let buf = &mut self.buf;
        with_fft(self.pad.dims, |fft| fft.forward_band(buf, [&mask[0], &mask[1], &mask[2]]));
    }

    /// Padded physical values of one band-limited component.
    pub fn to_padded(&mut self, a: &[Complex64], out: &mut [f64]) {
        self.scatter(a, None);
        self.inverse_buf();
        for (o, v) in out.iter_mut().zip(&self.buf) {
            *o = v.re;
        }
    }

    /// Padded physical values of two band-limited components in one transform.
    pub fn to_padded_pair(&mut self, a: &[Complex64], b: &[Complex64], oa: &mut [f64], ob: &mut [f64]) {
        self.scatter(a, Some(b));
        self.inverse_buf();
        for ((x, y), v) in oa.iter_mut().zip(ob.iter_mut()).zip(&self.buf) {
            *x = v.re;
            *y = v.im;
        }
    }

    fn gather(&self, scale: f64, out_a: &mut [Complex64], out_b: Option<&mut [Complex64]>) {
        let [n0, n1, n2] = self.base.dims;
        let [q0, p1, p2] = self.pad.dims;
        out_a.iter_mut().for_each(|x| *x = Complex64::default());
        let mut out_b = out_b;
        if let Some(b) = out_b.as_deref_mut() {
            b.iter_mut().for_each(|x| *x = Complex64::default());
        }
        for i in 0..n0 {
            let Some(pi) = self.map[0][i] else { continue };
            let qi = neg_index(q0, pi);
            for j in 0..n1 {
                let Some(pj) = self.map[1][j] else { continue };
                let qj = neg_index(p1, pj);
                for l in 0..n2 {
                    let Some(pl) = self.map[2][l] else { continue };
                    let ql = neg_index(p2, pl);
                    let dst = (i * n1 + j) * n2 + l;
                    let ck = self.buf[(pi * p1 + pj) * p2 + pl];
                    match out_b.as_deref_mut() {
                        None => out_a[dst] = ck * scale,
                        Some(b) => {
                            let cm = self.buf[(qi * p1 + qj) * p2 + ql].conj();
                            out_a[dst] = 0.5 * (ck + cm) * scale;
                            b[dst] = -0.5 * I * (ck - cm) * scale;
                        }
                    }
                }
            }
        }
    }

    /// Band coefficients of one padded real field.
    pub fn from_padded(&mut self, a: &[f64], out: &mut [Complex64]) {
        for (v, x) in self.buf.iter_mut().zip(a) {
            *v = Complex64::new(*x, 0.0);
        }
        self.forward_buf();
        let s = 1.0 / self.pad.len() as f64;
        self.gather(s, out, None);
    }

    /// Band coefficients of two padded real fields in one transform.
    pub fn from_padded_pair(&mut self, a: &[f64], b: &[f64], oa: &mut [Complex64], ob: &mut [Complex64]) {
        for ((v, x), y) in self.buf.iter_mut().zip(a).zip(b) {
            *v = Complex64::new(*x, *y);
        }
        self.forward_buf();
        let s = 1.0 / self.pad.len() as f64;
        self.gather(s, oa, Some(ob));
    }

    /// All three components on the padded lattice (two transforms).
    pub fn field_to_padded(&mut self, u: &SpectralField, out: &mut [Vec<f64>; 3]) {
        let [o0, o1, o2] = out;
        self.to_padded_pair(&u.c[0], &u.c[1], o0, o1);
        self.to_padded(&u.c[2], o2);
    }

    /// Band-truncated field from three padded components (two transforms).
    pub fn field_from_padded(&mut self, p: &[Vec<f64>; 3], out: &mut SpectralField) {
        let [c0, c1, c2] = &mut out.c;
        self.from_padded_pair(&p[0], &p[1], c0, c1);
        self.from_padded(&p[2], c2);
    }
}

/// Values of the nonlinear operators at one state, plus the quadrature norms
/// that come for free from the same padded evaluation.
#[derive(Debug, Clone)]
pub struct NonlinearTerms {
    /// `B(u) = P[(u.grad)u]`.
    pub b: SpectralField,
    /// `C(u) = P[|u|^{r-1} u]`.
    pub c: SpectralField,
    /// `int |u|^{r+1}`.
    pub lr1: f64,
    /// `int |u|^{3(r+1)}`.
    pub l3r1: f64,
    pub max_speed: f64,
}

/// Reusable workspace for the convective and damping terms.
pub struct Nonlinear {
    padder: Padder,
    wn: Wavenumbers,
    u: [Vec<f64>; 3],
    prod: [Vec<f64>; 6],
    prod_hat: [Vec<Complex64>; 6],
    damp: [Vec<f64>; 3],
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn pair_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

impl Nonlinear {
    pub fn new(grid: Grid) -> Self {
        let padder = Padder::new(grid);
        let np = padder.padded().len();
        let n = grid.len();
        Self {
            padder,
            wn: Wavenumbers::new(&grid),
            u: std::array::from_fn(|_| vec![0.0; np]),
            prod: std::array::from_fn(|_| vec![0.0; np]),
            prod_hat: std::array::from_fn(|_| vec![Complex64::default(); n]),
            damp: std::array::from_fn(|_| vec![0.0; np]),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.padder.base()
    }

    /// Evaluate `B(u)` and `C(u)` for a band-limited `u` (seven FFTs in total).
    pub fn evaluate(&mut self, u: &SpectralField, r: f64) -> NonlinearTerms {
        let grid = *self.padder.base();
        self.padder.field_to_padded(u, &mut self.u);
        let np = self.padder.padded().len();
        let hp = self.padder.padded().cell_volume();
        let (mut lr1, mut l3r1, mut vmax) = (0.0, 0.0, 0.0f64);
        for x in 0..np {
            let v = [self.u[0][x], self.u[1][x], self.u[2][x]];
            for (s, &(a, b)) in PAIRS.iter().enumerate() {
                self.prod[s][x] = v[a] * v[b];
            }
            let m2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            let w = if r == 3.0 { m2 } else { m2.powf(0.5 * (r - 1.0)) };
            for c in 0..3 {
                self.damp[c][x] = w * v[c];
            }
            lr1 += w * m2;
            l3r1 += (w * m2).powi(3);
            vmax = vmax.max(m2);
        }
        {
            let [p0, p1, p2, p3, p4, p5] = &mut self.prod_hat;
            self.padder.from_padded_pair(&self.prod[0], &self.prod[1], p0, p1);
            self.padder.from_padded_pair(&self.prod[2], &self.prod[3], p2, p3);
            self.padder.from_padded_pair(&self.prod[4], &self.prod[5], p4, p5);
        }
        let mut b = SpectralField::zeros(grid);
        for_each_mode(&grid, |idx, i, j, l| {
            if !self.wn.in_band(i, j, l) {
                return;
            }
            let k = self.wn.kvec(i, j, l);
            for ci in 0..3 {
                let mut acc = Complex64::default();
                for (cj, kj) in k.iter().enumerate() {
                    acc += *kj * self.prod_hat[pair_slot(ci, cj)][idx];
                }
                b.c[ci][idx] = I * acc;
            }
        });
        let mut c = SpectralField::zeros(grid);
        self.padder.field_from_padded(&self.damp, &mut c);
        NonlinearTerms {
            b: b.leray_project(),
            c: c.leray_project(),
            lr1: lr1 * hp,
            l3r1: l3r1 * hp,
            max_speed: vmax.sqrt(),
        }
    }

    /// Padded physical values of `u` (used by norm quadratures).
    pub fn padded_physical(&mut self, u: &SpectralField) -> PhysicalField {
        let mut out = PhysicalField::zeros(*self.padder.padded());
        self.padder.field_to_padded(u, &mut out.data);
        out
    }
}

fn check_band(u: &SpectralField) -> Result<()> {
    if u.is_band_limited() {
        Ok(())
    } else {
        Err(Error::Domain("operator requires a field confined to the 2/3 band".into()))
    }
}

/// `B(u) = P[(u.grad)u]`, dealiased.
pub fn convection_b(u: &SpectralField) -> Result<SpectralField> {
    check_band(u)?;
    Ok(Nonlinear::new(*u.grid()).evaluate(u, 3.0).b)
}

/// `C(u) = P[|u|^{r-1} u]` formed on the padded grid and truncated to the band.
pub fn damping_c(u: &SpectralField, r: f64) -> Result<SpectralField> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("damping exponent must be >= 1, got {r}")));
    }
    check_band(u)?;
    Ok(Nonlinear::new(*u.grid()).evaluate(u, r).c)
}

/// `b(u, v, w) = int (u.grad)v . w dx`, evaluated by quadrature on the padded grid.
pub fn trilinear_b(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.grid().check_same(v.grid())?;
    u.grid().check_same(w.grid())?;
    for f in [u, v, w] {
        check_band(f)?;
    }
    let mut padder = Padder::new(*u.grid());
    let np = padder.padded().len();
    let h = padder.padded().cell_volume();
    let mut up: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; np]);
    let mut wp: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; np]);
    padder.field_to_padded(u, &mut up);
    padder.field_to_padded(w, &mut wp);
    let mut dv = vec![0.0; np];
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            padder.to_padded(&v.derivative(i, j), &mut dv);
            acc += (0..np).map(|x| up[j][x] * dv[x] * wp[i][x]).sum::<f64>();
        }
    }
    Ok(acc * h)
}

/// Same form evaluated on the unpadded lattice; exact when `3K < n`.
pub fn trilinear_b_truncated(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.grid().check_same(v.grid())?;
    u.grid().check_same(w.grid())?;
    let grid = *u.grid();
    let (u, v, w) = (u.dealiased(), v.dealiased(), w.dealiased());
    let up = u.to_physical();
    let wp = w.to_physical();
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let dv = real_inverse(&grid, &v.derivative(i, j));
            acc += (0..grid.len()).map(|x| up.data[j][x] * dv[x] * wp.data[i][x]).sum::<f64>();
        }
    }
    Ok(acc * grid.cell_volume())
}

/// Norms of a band-limited field; L^p integrals use padded-grid quadrature.
pub fn compute_norms(u: &SpectralField, r: f64, k_radius: f64) -> Result<FieldNorms> {
    if !(r >= 1.0) {
        return Err(Error::Domain(format!("exponent must be >= 1, got {r}")));
    }
    let phys = Nonlinear::new(*u.grid()).padded_physical(&u.dealiased());
    let h2 = u.norm_sq();
    let g2 = u.grad_norm_sq();
    if !(k_radius > 0.0) {
        return Err(Error::Domain(format!("tail radius must be positive, got {k_radius}")));
    }
    let tail = cutoff::partition_unchecked(&phys, k_radius).tail;
    Ok(FieldNorms {
        h_norm: h2.sqrt(),
        grad_norm: g2.sqrt(),
        v_norm: (h2 + g2).sqrt(),
        lp_norm: phys.lp_integral(r + 1.0).powf(1.0 / (r + 1.0)),
        h_minus1_norm: u.h_minus1_norm().ok(),
        tail_norm: tail.max(0.0).sqrt(),
        l3rp1_norm: phys.lp_integral(3.0 * (r + 1.0)).powf(1.0 / (3.0 * (r + 1.0))),
    })
}

/// Pressure of the original system for `v = e^y u`, on the padded grid:
/// `p_hat = |k|^{-2} F[e^{2y} d_i d_j (u_i u_j) + beta e^{ry} div(|u|^{r-1}u) - div f]`.
pub fn pressure_recover(u: &SpectralField, y: f64, f: &SpectralField, beta: f64, r: f64) -> Result<ScalarField> {
    u.grid().check_same(f.grid())?;
    check_band(u)?;
    let mut padder = Padder::new(*u.grid());
    let pad = *padder.padded();
    let mut up: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; pad.len()]);
    padder.field_to_padded(u, &mut up);
    let fp = f.resample(pad)?;
    let wn = Wavenumbers::new(&pad);
    let q = |a: usize, b: usize| -> Vec<Complex64> {
        let prod: Vec<f64> = (0..pad.len()).map(|x| up[a][x] * up[b][x]).collect();
        real_forward(&pad, &prod)
    };
    let uu: Vec<Vec<Complex64>> = PAIRS.iter().map(|&(a, b)| q(a, b)).collect();
    let damp: Vec<Vec<Complex64>> = (0..3)
        .map(|c| {
            let vals: Vec<f64> = (0..pad.len())
                .map(|x| {
                    let m2 = up[0][x].powi(2) + up[1][x].powi(2) + up[2][x].powi(2);
                    m2.powf(0.5 * (r - 1.0)) * up[c][x]
                })
                .collect();
            real_forward(&pad, &vals)
        })
        .collect();
    let (e2y, ery) = ((2.0 * y).exp(), (r * y).exp());
    let mut p = ScalarField::zeros(pad);
    for_each_mode(&pad, |idx, i, j, l| {
        let k = wn.kvec(i, j, l);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 == 0.0 {
            return;
        }
        let mut dd = Complex64::default();
        for a in 0..3 {
            for b in 0..3 {
                dd -= k[a] * k[b] * uu[pair_slot(a, b)][idx];
            }
        }
        let mut dc = Complex64::default();
        let mut df = Complex64::default();
        for a in 0..3 {
            dc += I * k[a] * damp[a][idx];
            df += I * k[a] * fp.c[a][idx];
        }
        p.coeffs[idx] = (e2y * dd + beta * ery * dc - df) / k2;
    });
    Ok(p)
}
