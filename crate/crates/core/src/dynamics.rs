//! Right-hand sides of the pathwise random PDEs obtained from the OU
//! transformation, for multiplicative and additive noise.
//!
//! Multiplicative case, `v = e^{y} u`:
//! `du/dt = -mu A u - alpha u - e^{y} B(u) - beta e^{(r-1)y} C(u) + e^{-y} P f + sigma y u`.
//!
//! Additive case, `v = u + g y`, with `w = u + g y`:
//! `du/dt = -mu A u - alpha u - B(w) - beta C(w) + P f + (sigma - alpha) g y - mu y A g`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Nonlinear, SpectralField};
use crate::forcing::ForcingProfile;
use crate::grid::{Grid, Wavenumbers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCase {
    Multiplicative,
    Additive,
}

impl std::fmt::Display for NoiseCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseCase::Multiplicative => "multiplicative",
            NoiseCase::Additive => "additive",
        })
    }
}

impl std::str::FromStr for NoiseCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiplicative" => Ok(NoiseCase::Multiplicative),
            "additive" => Ok(NoiseCase::Additive),
            other => Err(Error::Config(format!("unknown noise case '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub sigma: f64,
    pub case: NoiseCase,
    /// Additive noise coefficient; ignored in the multiplicative case.
    pub g: Option<SpectralField>,
    pub grid: Grid,
    pub dt: f64,
}

/// Which branch of the admissible region a configuration falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `r > 3`, any `mu, beta > 0`.
    Supercritical,
    /// `r = 3` with `2 beta mu >= 1`.
    Critical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Admissibility {
    pub regime: Regime,
    pub two_beta_mu: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Accept exactly the parameter region where the theory applies.
pub fn validate_config(cfg: &SimConfig) -> Result<Admissibility> {
    positive("mu", cfg.mu)?;
    positive("alpha", cfg.alpha)?;
    positive("beta", cfg.beta)?;
    positive("sigma", cfg.sigma)?;
    positive("dt", cfg.dt)?;
    if !cfg.r.is_finite() {
        return Err(Error::Config(format!("r must be finite, got {}", cfg.r)));
    }
    let tbm = 2.0 * cfg.beta * cfg.mu;
    let regime = if cfg.r > 3.0 {
        Regime::Supercritical
    } else if cfg.r == 3.0 {
        if tbm < 1.0 - 1e-12 {
            return Err(Error::Config(format!(
                "inadmissible parameters: the critical case r = 3 requires 2*beta*mu >= 1, \
                 got 2*beta*mu = {tbm} (beta = {}, mu = {})",
                cfg.beta, cfg.mu
            )));
        }
        Regime::Critical
    } else {
        return Err(Error::Config(format!(
            "inadmissible parameters: r = {} is below 3; admissible are r > 3 (any mu, beta > 0) \
             or r = 3 with 2*beta*mu >= 1",
            cfg.r
        )));
    };
    if cfg.case == NoiseCase::Additive {
        let g = cfg
            .g
            .as_ref()
            .ok_or_else(|| Error::Config("additive noise needs a coefficient field g".into()))?;
        cfg.grid.check_same(g.grid()).map_err(|e| Error::Config(e.to_string()))?;
        if !g.is_solenoidal() {
            return Err(Error::Config("noise coefficient g must be divergence-free".into()));
        }
        if !g.is_band_limited() || !g.stokes_norm_sq().is_finite() {
            return Err(Error::Config("noise coefficient g must lie in the Stokes domain on the grid".into()));
        }
    }
    Ok(Admissibility { regime, two_beta_mu: tbm })
}

/// Stiff linear part `-(mu A + alpha) u` and the explicit remainder.
#[derive(Debug, Clone)]
pub struct RhsParts {
    pub linear: SpectralField,
    pub explicit: SpectralField,
}

impl RhsParts {
    pub fn total(&self) -> SpectralField {
        self.linear.add(&self.explicit).expect("parts share a grid")
    }
}

fn linear_part(u: &SpectralField, cfg: &SimConfig) -> SpectralField {
    let mut lin = u.stokes_apply().scaled(-cfg.mu);
    lin.axpy(-cfg.alpha, u).expect("same grid");
    lin
}

/// Multiplicative-noise right-hand side at a single state.
pub fn rhs_multiplicative(u: &SpectralField, y: f64, f_t: &SpectralField, cfg: &SimConfig) -> Result<RhsParts> {
    cfg.grid.check_same(u.grid())?;
    cfg.grid.check_same(f_t.grid())?;
    let nl = Nonlinear::new(cfg.grid).evaluate(u, cfg.r);
    let mut ex = f_t.leray_project().scaled((-y).exp());
    ex.axpy(-y.exp(), &nl.b)?;
    ex.axpy(-cfg.beta * ((cfg.r - 1.0) * y).exp(), &nl.c)?;
    ex.axpy(cfg.sigma * y, u)?;
    Ok(RhsParts { linear: linear_part(u, cfg), explicit: ex })
}

/// Additive-noise right-hand side at a single state.
pub fn rhs_additive(u: &SpectralField, y: f64, f_t: &SpectralField, cfg: &SimConfig) -> Result<RhsParts> {
    cfg.grid.check_same(u.grid())?;
    cfg.grid.check_same(f_t.grid())?;
    let zero = SpectralField::zeros(cfg.grid);
    let g = cfg.g.as_ref().unwrap_or(&zero);
    let mut w = u.clone();
    w.axpy(y, g)?;
    let nl = Nonlinear::new(cfg.grid).evaluate(&w, cfg.r);
    let mut ex = f_t.leray_project();
    ex.axpy(-1.0, &nl.b)?;
    ex.axpy(-cfg.beta, &nl.c)?;
    ex.axpy((cfg.sigma - cfg.alpha) * y, g)?;
    ex.axpy(-cfg.mu * y, &g.stokes_apply())?;
    Ok(RhsParts { linear: linear_part(u, cfg), explicit: ex })
}

/// Quadrature byproducts of one explicit evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct RhsStats {
    /// `int |w|^{r+1}` with `w = u` (multiplicative) or `u + g y` (additive).
    pub lr1: f64,
    /// `int |w|^{3(r+1)}`.
    pub l3r1: f64,
    pub max_speed: f64,
    /// Explicit-term stiffness estimate; stability needs `dt * lambda` below the CFL number.
    pub lambda: f64,
}

/// Explicit-part evaluator with preallocated workspace and a precomputed
/// projected forcing shape.
pub struct Rhs {
    cfg: SimConfig,
    forcing: ForcingProfile,
    pf_inf: SpectralField,
    g: SpectralField,
    ag: SpectralField,
    nl: Nonlinear,
    kmax_sum: f64,
}

impl Rhs {
    pub fn new(cfg: &SimConfig, forcing: &ForcingProfile) -> Result<Self> {
        cfg.grid.check_same(forcing.f_inf().grid())?;
        let g = match cfg.case {
            NoiseCase::Additive => cfg.g.clone().unwrap_or_else(|| SpectralField::zeros(cfg.grid)),
            NoiseCase::Multiplicative => SpectralField::zeros(cfg.grid),
        };
        let wn = Wavenumbers::new(&cfg.grid);
        let kmax_sum = (0..3)
            .map(|d| {
                wn.k[d]
                    .iter()
                    .zip(&wn.band[d])
                    .filter(|(_, b)| **b)
                    .fold(0.0f64, |a, (k, _)| a.max(k.abs()))
            })
            .sum();
        Ok(Self {
            cfg: cfg.clone(),
            forcing: forcing.clone(),
            pf_inf: forcing.f_inf().leray_project(),
            ag: g.stokes_apply(),
            g,
            nl: Nonlinear::new(cfg.grid),
            kmax_sum,
        })
    }

    pub fn cfg(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn forcing(&self) -> &ForcingProfile {
        &self.forcing
    }

    pub fn g(&self) -> &SpectralField {
        &self.g
    }

    /// Explicit terms at physical time `t` with OU value `y`.
    pub fn explicit(&mut self, u: &SpectralField, t: f64, y: f64) -> (SpectralField, RhsStats) {
        let cfg = &self.cfg;
        let fs = self.forcing.scale(t);
        match cfg.case {
            NoiseCase::Multiplicative => {
                let nl = self.nl.evaluate(u, cfg.r);
                let ey = y.exp();
                let damp = cfg.beta * ((cfg.r - 1.0) * y).exp();
                let mut ex = self.pf_inf.scaled(fs / ey);
                ex.axpy(-ey, &nl.b).expect("grid");
                ex.axpy(-damp, &nl.c).expect("grid");
                ex.axpy(cfg.sigma * y, u).expect("grid");
                let v = nl.max_speed;
                let lambda = ey * v * self.kmax_sum + damp * cfg.r * v.powf(cfg.r - 1.0) + cfg.sigma * y.abs();
                (ex, RhsStats { lr1: nl.lr1, l3r1: nl.l3r1, max_speed: v, lambda })
            }
            NoiseCase::Additive => {
                let mut w = u.clone();
                w.axpy(y, &self.g).expect("grid");
                let nl = self.nl.evaluate(&w, cfg.r);
                let mut ex = self.pf_inf.scaled(fs);
                ex.axpy(-1.0, &nl.b).expect("grid");
                ex.axpy(-cfg.beta, &nl.c).expect("grid");
                ex.axpy((cfg.sigma - cfg.alpha) * y, &self.g).expect("grid");
                ex.axpy(-cfg.mu * y, &self.ag).expect("grid");
                let v = nl.max_speed;
                let lambda = v * self.kmax_sum + cfg.beta * cfg.r * v.powf(cfg.r - 1.0);
                (ex, RhsStats { lr1: nl.lr1, l3r1: nl.l3r1, max_speed: v, lambda })
            }
        }
    }

    /// Original variable from the transformed one: `v = e^y u` or `v = u + g y`.
    pub fn to_original(&self, u: &SpectralField, y: f64) -> SpectralField {
        match self.cfg.case {
            NoiseCase::Multiplicative => u.scaled(y.exp()),
            NoiseCase::Additive => {
                let mut v = u.clone();
                v.axpy(y, &self.g).expect("grid");
                v
            }
        }
    }

    pub fn from_original(&self, v: &SpectralField, y: f64) -> SpectralField {
        match self.cfg.case {
            NoiseCase::Multiplicative => v.scaled((-y).exp()),
            NoiseCase::Additive => {
                let mut u = v.clone();
                u.axpy(-y, &self.g).expect("grid");
                u
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingMode;

    pub(crate) fn base_cfg(case: NoiseCase) -> SimConfig {
        SimConfig {
            mu: 1.0,
            alpha: 1.0,
            beta: 1.0,
            r: 3.0,
            sigma: 1.0,
            case,
            g: None,
            grid: Grid::cube(16, 4.0 * std::f64::consts::PI).unwrap(),
            dt: 0.05,
        }
    }

    #[test]
    fn admissible_region() {
        let mut c = base_cfg(NoiseCase::Multiplicative);
        c.beta = 1.0;
        c.mu = 0.5;
        assert_eq!(validate_config(&c).unwrap().regime, Regime::Critical);
        c.beta = 0.4;
        c.mu = 1.0;
        let msg = validate_config(&c).unwrap_err().to_string();
        assert!(msg.contains("2*beta*mu >= 1"), "{msg}");
        c.r = 5.0;
        c.beta = 1e-3;
        c.mu = 1e-3;
        assert_eq!(validate_config(&c).unwrap().regime, Regime::Supercritical);
        c.r = 2.5;
        assert!(validate_config(&c).is_err());
    }

    #[test]
    fn additive_requires_solenoidal_g() {
        let mut c = base_cfg(NoiseCase::Additive);
        assert!(validate_config(&c).is_err());
        let g = SpectralField::plane_wave(c.grid, [1, 0, 0], [1.0, 0.0, 0.0], [0.0; 3]);
        c.g = Some(g);
        assert!(validate_config(&c).is_err());
        c.g = Some(SpectralField::plane_wave(c.grid, [1, 0, 0], [0.0, 1.0, 0.0], [0.0; 3]));
        assert!(validate_config(&c).is_ok());
    }

    #[test]
    fn fast_evaluator_matches_reference_assembly() {
        let mut cfg = base_cfg(NoiseCase::Additive);
        let forcing = ForcingProfile::gaussian_curl(cfg.grid, 1.0, 1.5, 2, ForcingMode::ExpRelax).unwrap();
        let g = ForcingProfile::gaussian_curl(cfg.grid, 0.3, 1.5, 0, ForcingMode::Autonomous).unwrap();
        cfg.g = Some(g.f_inf().clone());
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let u = SpectralField::random_solenoidal(cfg.grid, &mut rng, 4.0);
        for case in [NoiseCase::Additive, NoiseCase::Multiplicative] {
            cfg.case = case;
            let mut rhs = Rhs::new(&cfg, &forcing).unwrap();
            let (t, y) = (-0.7, 0.4);
            let (fast, _) = rhs.explicit(&u, t, y);
            let f_t = forcing.at(t);
            let slow = match case {
                NoiseCase::Additive => rhs_additive(&u, y, &f_t, &cfg).unwrap(),
                NoiseCase::Multiplicative => rhs_multiplicative(&u, y, &f_t, &cfg).unwrap(),
            };
            let err = fast.sub(&slow.explicit).unwrap().norm();
            assert!(err <= 1e-12 * slow.explicit.norm(), "{case}: {err}");
        }
    }
}
