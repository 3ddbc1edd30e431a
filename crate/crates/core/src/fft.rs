//! Three-dimensional complex FFTs assembled from `rustfft` line transforms.
//!
//! Transforms are unnormalized in both directions. Band-limited variants skip
//! lines that are known to be zero on input (inverse) or whose output is not
//! needed (forward); this is what makes 3/2-padded products affordable.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = [0, 1, 2].map(|a| planner.plan_fft_forward(dims[a]));
        let inv = [0, 1, 2].map(|a| planner.plan_fft_inverse(dims[a]));
        let scratch_len = fwd
            .iter()
            .chain(inv.iter())
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        let batch = dims[2] * dims[0].max(dims[1]);
        Self {
            dims,
            fwd,
            inv,
            buffer: vec![Complex64::default(); batch],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, Direction::Forward, None);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, Direction::Inverse, None);
    }

    /// Inverse transform of data that vanishes outside `mask[0] x mask[1] x mask[2]`.
    pub fn inverse_band(&mut self, data: &mut [Complex64], mask: [&[bool]; 3]) {
        self.run(data, Direction::Inverse, Some(mask));
    }

    /// Forward transform whose output is only valid inside `mask[0] x mask[1] x mask[2]`.
    pub fn forward_band(&mut self, data: &mut [Complex64], mask: [&[bool]; 3]) {
        self.run(data, Direction::Forward, Some(mask));
    }

    fn run(&mut self, data: &mut [Complex64], dir: Direction, mask: Option<[&[bool]; 3]>) {
        assert_eq!(data.len(), self.dims.iter().product::<usize>());
        match dir {
            Direction::Inverse => {
                self.axis2(data, dir, mask.map(|m| (m[0], m[1])));
                self.axis1(data, dir, mask.map(|m| m[0]));
                self.axis0(data, dir);
            }
            Direction::Forward => {
                self.axis0(data, dir);
                self.axis1(data, dir, mask.map(|m| m[0]));
                self.axis2(data, dir, mask.map(|m| (m[0], m[1])));
            }
        }
    }

    fn plan(&self, axis: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
        match dir {
            Direction::Forward => self.fwd[axis].clone(),
            Direction::Inverse => self.inv[axis].clone(),
        }
    }

    fn axis2(&mut self, data: &mut [Complex64], dir: Direction, mask: Option<(&[bool], &[bool])>) {
        let [n0, n1, n2] = self.dims;
        let plan = self.plan(2, dir);
        match mask {
            None => plan.process_with_scratch(data, &mut self.scratch),
            Some((m0, m1)) => {
                for i in 0..n0 {
                    if !m0[i] {
                        continue;
                    }
                    for j in 0..n1 {
                        if !m1[j] {
                            continue;
                        }
                        let start = (i * n1 + j) * n2;
                        plan.process_with_scratch(&mut data[start..start + n2], &mut self.scratch);
                    }
                }
            }
        }
    }

    fn axis1(&mut self, data: &mut [Complex64], dir: Direction, mask: Option<&[bool]>) {
        let [n0, n1, n2] = self.dims;
        let plan = self.plan(1, dir);
        let buf = &mut self.buffer[..n1 * n2];
        for i in 0..n0 {
            if let Some(m0) = mask {
                if !m0[i] {
                    continue;
                }
            }
            let plane = &mut data[i * n1 * n2..(i + 1) * n1 * n2];
            for j in 0..n1 {
                for l in 0..n2 {
                    buf[l * n1 + j] = plane[j * n2 + l];
                }
            }
            plan.process_with_scratch(buf, &mut self.scratch);
            for j in 0..n1 {
                for l in 0..n2 {
                    plane[j * n2 + l] = buf[l * n1 + j];
                }
            }
        }
    }

    fn axis0(&mut self, data: &mut [Complex64], dir: Direction) {
        let [n0, n1, n2] = self.dims;
        let plan = self.plan(0, dir);
        let buf = &mut self.buffer[..n0 * n2];
        for j in 0..n1 {
            for i in 0..n0 {
                let row = (i * n1 + j) * n2;
                for l in 0..n2 {
                    buf[l * n0 + i] = data[row + l];
                }
            }
            plan.process_with_scratch(buf, &mut self.scratch);
            for i in 0..n0 {
                let row = (i * n1 + j) * n2;
                for l in 0..n2 {
                    data[row + l] = buf[l * n0 + i];
                }
            }
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<[usize; 3], Fft3>> = RefCell::new(HashMap::new());
}

/// Run `f` with this thread's cached transform for `dims`.
pub fn with_fft<R>(dims: [usize; 3], f: impl FnOnce(&mut Fft3) -> R) -> R {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        let fft = map.entry(dims).or_insert_with(|| Fft3::new(dims));
        f(fft)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], dims: [usize; 3], sign: f64) -> Vec<Complex64> {
        let [n0, n1, n2] = dims;
        let mut out = vec![Complex64::default(); data.len()];
        for a in 0..n0 {
            for b in 0..n1 {
                for c in 0..n2 {
                    let mut acc = Complex64::default();
                    for i in 0..n0 {
                        for j in 0..n1 {
                            for l in 0..n2 {
                                let ph = sign
                                    * 2.0
                                    * std::f64::consts::PI
                                    * ((a * i) as f64 / n0 as f64
                                        + (b * j) as f64 / n1 as f64
                                        + (c * l) as f64 / n2 as f64);
                                acc += data[(i * n1 + j) * n2 + l] * Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                    out[(a * n1 + b) * n2 + c] = acc;
                }
            }
        }
        out
    }

    fn sample(dims: [usize; 3]) -> Vec<Complex64> {
        let n: usize = dims.iter().product();
        (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn matches_naive_dft_on_anisotropic_grid() {
        let dims = [4, 6, 8];
        let x = sample(dims);
        let mut y = x.clone();
        let mut fft = Fft3::new(dims);
        fft.forward(&mut y);
        let reference = naive_dft(&x, dims, -1.0);
        for (a, b) in y.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-10);
        }
        fft.inverse(&mut y);
        let n = x.len() as f64;
        for (a, b) in y.iter().zip(&x) {
            assert!((a / n - b).norm() < 1e-12);
        }
    }

    #[test]
    fn band_limited_inverse_matches_full() {
        let dims = [12, 12, 12];
        let mask: Vec<bool> = (0..12).map(|i| i <= 3 || i >= 9).collect();
        let mut x = sample(dims);
        for i in 0..12 {
            for j in 0..12 {
                for l in 0..12 {
                    if !(mask[i] && mask[j] && mask[l]) {
                        x[(i * 12 + j) * 12 + l] = Complex64::default();
                    }
                }
            }
        }
        let mut full = x.clone();
        let mut pruned = x.clone();
        let mut fft = Fft3::new(dims);
        fft.inverse(&mut full);
        fft.inverse_band(&mut pruned, [&mask, &mask, &mask]);
        for (a, b) in full.iter().zip(&pruned) {
            assert!((a - b).norm() < 1e-12);
        }
        let mut f_full = full.clone();
        let mut f_band = full;
        fft.forward(&mut f_full);
        fft.forward_band(&mut f_band, [&mask, &mask, &mask]);
        for i in 0..12 {
            for j in 0..12 {
                for l in 0..12 {
                    if mask[i] && mask[j] && mask[l] {
                        let idx = (i * 12 + j) * 12 + l;
                        assert!((f_full[idx] - f_band[idx]).norm() < 1e-10);
                    }
                }
            }
        }
    }
}
