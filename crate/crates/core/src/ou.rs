//! Two-sided Wiener paths, the Wiener shift and the stationary
//! Ornstein-Uhlenbeck process `dy + sigma y dt = dW`.
//!
//! A path owns one long node grid covering `[t_min, t_max]`. Shifting only
//! moves the origin inside that grid, so shifted paths share storage and
//! every derived quantity (in particular `y`) is exactly shift-covariant.
//!
//! The OU recursion is the exact Gaussian transition driven jointly with the
//! Brownian increments:
//! `y_{n+1} = e^{-sigma dt} y_n + c1 dW_n + c2 Z_n`, with `Z_n` an auxiliary
//! standard normal drawn from the same seed stream and `c1`, `c2` chosen so
//! that `(y_{n+1}, dW_n)` has the law of the continuous process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug)]
struct PathData {
    /// Cumulative sums of `dw` from the first node; `raw[0] = 0`.
    raw: Vec<f64>,
    dw: Vec<f64>,
    z: Vec<f64>,
    z_init: f64,
}

/// Discretized two-sided Brownian path with a movable origin.
#[derive(Debug, Clone)]
pub struct WienerPath {
    seed: u64,
    dt: f64,
    /// Global node index of `t = 0`.
    origin: usize,
    data: Arc<PathData>,
}

fn steps_of(t: f64, dt: f64) -> Result<usize> {
    let q = t.abs() / dt;
    let n = q.round();
    if (q - n).abs() > 1e-9 * q.max(1.0) {
        return Err(Error::Config(format!("time {t} is not a multiple of dt_path = {dt}")));
    }
    Ok(n as usize)
}

/// Counter-based seed derivation: SplitMix64 applied to `master + (index+1) * golden`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl WienerPath {
    /// Draw a path on `[t_min, t_max]`; `dt_path` must divide both ends.
    pub fn sample(seed: u64, t_min: f64, t_max: f64, dt_path: f64) -> Result<Self> {
        if !(dt_path > 0.0) || !dt_path.is_finite() {
            return Err(Error::Domain(format!("dt_path must be positive, got {dt_path}")));
        }
        if !(t_min < 0.0 && t_max > 0.0) {
            return Err(Error::Config(format!(
                "path support must straddle 0, got [{t_min}, {t_max}]"
            )));
        }
        let n_back = steps_of(t_min, dt_path)?;
        let n_fwd = steps_of(t_max, dt_path)?;
        let n = n_back + n_fwd;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z_init: f64 = StandardNormal.sample(&mut rng);
        let sq = dt_path.sqrt();
        let mut dw = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            dw.push(sq * a);
            z.push(b);
        }
        Self::from_parts(seed, dt_path, n_back, dw, z, z_init)
    }

    /// Assemble a path from explicit increments; `origin` is the node index of `t = 0`.
    pub fn from_parts(seed: u64, dt_path: f64, origin: usize, dw: Vec<f64>, z: Vec<f64>, z_init: f64) -> Result<Self> {
        if !(dt_path > 0.0) {
            return Err(Error::Domain(format!("dt_path must be positive, got {dt_path}")));
        }
        if dw.len() != z.len() || origin == 0 || origin >= dw.len() {
            return Err(Error::Config("increment arrays inconsistent with origin".into()));
        }
        let mut raw = Vec::with_capacity(dw.len() + 1);
        let mut acc = 0.0;
        raw.push(0.0);
        for d in &dw {
            acc += d;
            raw.push(acc);
        }
        Ok(Self { seed, dt: dt_path, origin, data: Arc::new(PathData { raw, dw, z, z_init }) })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_nodes(&self) -> usize {
        self.data.raw.len()
    }

    /// Number of steps before `t = 0`.
    pub fn n_back(&self) -> usize {
        self.origin
    }

    pub fn n_fwd(&self) -> usize {
        self.n_nodes() - 1 - self.origin
    }

    pub fn t_min(&self) -> f64 {
        -(self.origin as f64) * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.n_fwd() as f64 * self.dt
    }

    /// Time of node `i` (0-based from `t_min`).
    pub fn node_time(&self, i: usize) -> f64 {
        (i as f64 - self.origin as f64) * self.dt
    }

    /// `W` at node `i`; exactly 0 at the origin.
    pub fn node_value(&self, i: usize) -> f64 {
        self.data.raw[i] - self.data.raw[self.origin]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node_value(i)).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node_time(i)).collect()
    }

    /// Increment `W(t_{i+1}) - W(t_i)` for node `i`.
    pub fn increments(&self) -> &[f64] {
        &self.data.dw
    }

    /// `W(t)` by linear interpolation; `None` outside the support.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let s = t / self.dt + self.origin as f64;
        if s < -1e-9 || s > (self.n_nodes() - 1) as f64 + 1e-9 {
            return None;
        }
        let s = s.clamp(0.0, (self.n_nodes() - 1) as f64);
        let i = (s.floor() as usize).min(self.n_nodes() - 2);
        let w = s - i as f64;
        Some((1.0 - w) * self.node_value(i) + w * self.node_value(i + 1))
    }

    /// Wiener shift `theta_s`: the result reads `omega(t + s) - omega(s)`.
    ///
    /// The shifted path keeps the whole underlying grid, so its support is
    /// `[t_min - s, t_max - s]`.
    pub fn shift(&self, s: f64) -> Result<Self> {
        let q = s / self.dt;
        let m = q.round();
        if (q - m).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(Error::Config(format!("shift {s} is not a multiple of dt_path")));
        }
        self.shift_steps(m as i64)
    }

    pub fn shift_steps(&self, m: i64) -> Result<Self> {
        let o = self.origin as i64 + m;
        if o <= 0 || o >= (self.n_nodes() - 1) as i64 {
            return Err(Error::Range(format!(
                "shift by {} leaves the path support [{}, {}]",
                m as f64 * self.dt,
                self.t_min(),
                self.t_max()
            )));
        }
        Ok(Self { origin: o as usize, ..self.clone() })
    }
}

pub fn sample_wiener_path(seed: u64, t_min: f64, t_max: f64, dt_path: f64) -> Result<WienerPath> {
    WienerPath::sample(seed, t_min, t_max, dt_path)
}

pub fn shift_path(path: &WienerPath, s: f64) -> Result<WienerPath> {
    path.shift(s)
}

/// Stationary OU process `y(theta_t omega)` on the nodes of a path.
#[derive(Debug, Clone)]
pub struct OUState {
    sigma: f64,
    dt: f64,
    origin: usize,
    y: Arc<Vec<f64>>,
    /// Prefix integrals `int_{t_0}^{t_i} y`.
    cum: Arc<Vec<f64>>,
}

/// Coefficients `(decay, c1, c2)` of the exact joint OU/Brownian step.
pub fn transition(sigma: f64, dt: f64) -> (f64, f64, f64) {
    let a = sigma * dt;
    let decay = (-a).exp();
    let c1 = -(-a).exp_m1() / a;
    let var = -(-2.0 * a).exp_m1() / (2.0 * sigma);
    let c2 = (var - c1 * c1 * dt).max(0.0).sqrt();
    (decay, c1, c2)
}

impl OUState {
    fn build(sigma: f64, dt: f64, origin: usize, y: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(y.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in y.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            cum.push(acc);
        }
        Self { sigma, dt, origin, y: Arc::new(y), cum: Arc::new(cum) }
    }

    /// Run `y_{n+1} = e^{-sigma dt} y_n + xi_n` from `y0`; the origin is node `origin`.
    pub fn from_recursion(sigma: f64, dt: f64, origin: usize, y0: f64, xi: &[f64]) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
        }
        let decay = (-sigma * dt).exp();
        let mut y = Vec::with_capacity(xi.len() + 1);
        y.push(y0);
        for x in xi {
            let last = *y.last().unwrap();
            y.push(decay * last + x);
        }
        Ok(Self::build(sigma, dt, origin, y))
    }

    /// Identically zero process on a grid shaped like `path`.
    pub fn zero(path: &WienerPath, sigma: f64) -> Self {
        Self::build(sigma, path.dt, path.origin, vec![0.0; path.n_nodes()])
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_min(&self) -> f64 {
        -(self.origin as f64) * self.dt
    }

    pub fn t_max(&self) -> f64 {
        (self.y.len() - 1 - self.origin) as f64 * self.dt
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        let eps = 1e-9 * self.dt;
        a >= self.t_min() - eps && b <= self.t_max() + eps
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y
    }

    pub fn node_time(&self, i: usize) -> f64 {
        (i as f64 - self.origin as f64) * self.dt
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = (self.y.len() - 1) as f64;
        let mut s = (t / self.dt + self.origin as f64).clamp(0.0, last);
        // node times computed in floating point land on the node
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        let i = (s.floor() as usize).min(self.y.len() - 2);
        (i, s - i as f64)
    }

    /// Value at node time `k dt`, if stored.
    pub fn y_node(&self, k: i64) -> Option<f64> {
        usize::try_from(self.origin as i64 + k).ok().and_then(|i| self.y.get(i).copied())
    }

    /// `y(t)` by linear interpolation; clamped to the end values outside the support.
    pub fn y(&self, t: f64) -> f64 {
        let (i, w) = self.locate(t);
        if w == 0.0 {
            self.y[i]
        } else {
            (1.0 - w) * self.y[i] + w * self.y[i + 1]
        }
    }

    fn prefix(&self, t: f64) -> f64 {
        let (i, w) = self.locate(t);
        let a = self.y[i];
        let b = self.y[i + 1];
        self.cum[i] + self.dt * w * (a + 0.5 * w * (b - a))
    }

    /// `int_a^b y(t) dt`, exact for the piecewise-linear interpolant.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.prefix(b) - self.prefix(a)
    }

    /// Same process read through `theta_s`, i.e. `t -> y(t + s)`.
    pub fn shifted_steps(&self, m: i64) -> Result<Self> {
        let o = self.origin as i64 + m;
        if o <= 0 || o >= (self.y.len() - 1) as i64 {
            return Err(Error::Range("shift leaves the OU support".into()));
        }
        Ok(Self { origin: o as usize, ..self.clone() })
    }
}

/// Stationary OU process driven by `path`, started from `N(0, 1/(2 sigma))` at `t_min`.
pub fn ou_evaluate(path: &WienerPath, sigma: f64) -> Result<OUState> {
    ou_evaluate_from(path, sigma, None)
}

/// As [`ou_evaluate`], optionally forcing the value at the first node.
pub fn ou_evaluate_from(path: &WienerPath, sigma: f64, y0: Option<f64>) -> Result<OUState> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let (_, c1, c2) = transition(sigma, path.dt);
    let y0 = y0.unwrap_or(path.data.z_init / (2.0 * sigma).sqrt());
    let xi: Vec<f64> = path
        .data
        .dw
        .iter()
        .zip(&path.data.z)
        .map(|(dw, z)| c1 * dw + c2 * z)
        .collect();
    OUState::from_recursion(sigma, path.dt, path.origin, y0, &xi)
}

/// Empirical smallness statistics of the OU sample path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthStatistic {
    /// `max |y(t)| / |t|` over nodes with `|t| >= T/2`.
    pub ratio_tail: f64,
    /// `(1/T) int_{-T}^0 y dt`.
    pub ergodic_mean: f64,
}

/// Growth statistics over the backward window `T = |t_min|`.
pub fn growth_statistic(state: &OUState) -> Result<GrowthStatistic> {
    let t = -state.t_min();
    if t * state.sigma < 100.0 * (1.0 - 1e-12) {
        return Err(Error::Range(format!(
            "growth statistic needs |t_min| >= 100/sigma, got {t}"
        )));
    }
    let mut ratio = 0.0f64;
    for (i, y) in state.y.iter().enumerate() {
        let ti = state.node_time(i).abs();
        if ti >= 0.5 * t {
            ratio = ratio.max(y.abs() / ti);
        }
    }
    Ok(GrowthStatistic { ratio_tail: ratio, ergodic_mean: state.integral(-t, 0.0) / t })
}
