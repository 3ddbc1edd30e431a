//! Time-dependent body forces `f(x, t) = s(t) f_inf(x)`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

/// Time dependence of the forcing amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingMode {
    /// `f = f_inf` for all times.
    Autonomous,
    /// `f = f_inf (e^t + 1)`.
    ExpRelax,
    /// Piecewise-linear scale through `(times[i], scale[i])`, constant outside.
    Table { times: Vec<f64>, scale: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ForcingProfile {
    f_inf: SpectralField,
    mode: ForcingMode,
}

impl ForcingProfile {
    pub fn new(f_inf: SpectralField, mode: ForcingMode) -> Result<Self> {
        if let ForcingMode::Table { times, scale } = &mode {
            if times.is_empty() || times.len() != scale.len() {
                return Err(Error::Config("forcing table needs matching, nonempty columns".into()));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("forcing table times must increase".into()));
            }
        }
        Ok(Self { f_inf, mode })
    }

    pub fn zero(grid: Grid) -> Self {
        Self { f_inf: SpectralField::zeros(grid), mode: ForcingMode::Autonomous }
    }

    /// `f_inf = amplitude * curl(e_axis exp(-|x|^2 / (2 width^2)))`, truncated to the band.
    ///
    /// A curl is solenoidal and mean-free, so the negative Sobolev norm is finite.
    pub fn gaussian_curl(grid: Grid, amplitude: f64, width: f64, axis: usize, mode: ForcingMode) -> Result<Self> {
        if !(width > 0.0) || axis > 2 {
            return Err(Error::Config(format!("bad forcing shape: width {width}, axis {axis}")));
        }
        let potential = SpectralField::from_fn(grid, |x| {
            let g = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * width * width)).exp();
            let mut v = [0.0; 3];
            v[axis] = amplitude * g;
            v
        });
        let mut f = potential.dealiased().curl();
        f.dealias();
        Self::new(f, mode)
    }

    pub fn f_inf(&self) -> &SpectralField {
        &self.f_inf
    }

    pub fn mode(&self) -> &ForcingMode {
        &self.mode
    }

    /// The autonomous limit as its own profile.
    pub fn limit(&self) -> Self {
        Self { f_inf: self.f_inf.clone(), mode: ForcingMode::Autonomous }
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.mode, ForcingMode::Autonomous)
    }

    pub fn scale(&self, t: f64) -> f64 {
        match &self.mode {
            ForcingMode::Autonomous => 1.0,
            ForcingMode::ExpRelax => t.exp() + 1.0,
            ForcingMode::Table { times, scale } => {
                let n = times.len();
                if t <= times[0] {
                    return scale[0];
                }
                if t >= times[n - 1] {
                    return scale[n - 1];
                }
                let i = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                (1.0 - w) * scale[i] + w * scale[i + 1]
            }
        }
    }

    pub fn at(&self, t: f64) -> SpectralField {
        self.f_inf.scaled(self.scale(t))
    }

    pub fn norm_sq_at(&self, t: f64) -> f64 {
        self.scale(t).powi(2) * self.f_inf.norm_sq()
    }

    /// `int_{-inf}^tau ||f(t) - f_inf||^2 dt`; closed form where available.
    pub fn approach_integral(&self, tau: f64) -> f64 {
        let n2 = self.f_inf.norm_sq();
        match &self.mode {
            ForcingMode::Autonomous => 0.0,
            ForcingMode::ExpRelax => 0.5 * (2.0 * tau).exp() * n2,
            ForcingMode::Table { times, scale } => {
                if (scale[0] - 1.0).abs() > 1e-12 {
                    return f64::INFINITY;
                }
                let mut acc = 0.0;
                let steps = 4000;
                let a = times[0];
                if tau <= a {
                    return 0.0;
                }
                let h = (tau - a) / steps as f64;
                for i in 0..steps {
                    let t = a + (i as f64 + 0.5) * h;
                    acc += (self.scale(t) - 1.0).powi(2) * h;
                }
                acc * n2
            }
        }
    }

    /// `sup_{s <= tau} int_{-inf}^s e^{kappa(xi - s)} w(xi) dxi` for `w = ||f||^2`,
    /// with `f_norm_sq` standing in for `||f_inf||^2` (so tail masses can reuse it).
    ///
    /// Closed form for the autonomous and exponential profiles; tables use a
    /// trapezoid rule truncated at `s - 40/kappa` and a sup over a uniform `s`-grid.
    pub fn weighted_history(&self, kappa: f64, tau: f64, f_norm_sq: f64) -> Result<f64> {
        if !(kappa > 0.0) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        Ok(match &self.mode {
            ForcingMode::Autonomous => f_norm_sq / kappa,
            ForcingMode::ExpRelax => {
                // Increasing in s, so the sup sits at s = tau.
                let e = tau.exp();
                f_norm_sq * (e * e / (kappa + 2.0) + 2.0 * e / (kappa + 1.0) + 1.0 / kappa)
            }
            ForcingMode::Table { times, .. } => {
                let lo = times[0].min(tau) - 10.0;
                let mut best = 0.0f64;
                let ns = 200;
                for j in 0..=ns {
                    let s = lo + (tau - lo) * j as f64 / ns as f64;
                    let t0 = s - 40.0 / kappa;
                    let m = 4000;
                    let h = (s - t0) / m as f64;
                    let mut acc = 0.0;
                    for i in 0..=m {
                        let xi = t0 + i as f64 * h;
                        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                        acc += w * (kappa * (xi - s)).exp() * self.scale(xi).powi(2);
                    }
                    best = best.max(acc * h * f_norm_sq);
                }
                best
            }
        })
    }

    /// `sup_{s <= tau} int_{-inf}^0 e^{delta t} ||f(t+s)||^2_{H^-1} dt`.
    pub fn sobolev_history(&self, delta: f64, tau: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::Domain(format!(
                "the weighted negative-norm bound is reported for delta > 0, got {delta}"
            )));
        }
        let h = self.f_inf.h_minus1_norm()?;
        self.weighted_history(delta, tau, h * h)
    }
}
