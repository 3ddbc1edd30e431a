//! JSON run configuration. Unknown keys are rejected; every key has a default.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{validate_config, Admissibility, NoiseCase, SimConfig};
use crate::error::{Error, Result};
use crate::forcing::{ForcingMode, ForcingProfile};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 16, length: 4.0 * std::f64::consts::PI }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub sigma: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Self { mu: 1.0, alpha: 1.0, beta: 1.0, r: 3.0, sigma: 1.0 }
    }
}

/// `amplitude * curl(e_axis exp(-|x|^2 / (2 width^2)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ShapeConfig {
    pub amplitude: f64,
    pub width: f64,
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    pub amplitude: f64,
    pub width: f64,
    pub axis: usize,
    pub mode: ForcingMode,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        Self { amplitude: 1.0, width: 1.5, axis: 2, mode: ForcingMode::ExpRelax }
    }
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self { amplitude: 0.3, width: 1.5, axis: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub master_seed: u64,
    pub dt_path: f64,
    /// Replace the OU process by zero.
    pub quiet: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { master_seed: 7, dt_path: 0.05, quiet: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub tau: f64,
    pub horizon: f64,
    /// Snapshot every this many steps; the horizon must be a multiple.
    pub snapshot_every: usize,
    /// Norm of the random solenoidal initial state (zero gives the rest state).
    pub initial_norm: f64,
    pub initial_seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { tau: -10.0, horizon: 10.0, snapshot_every: 40, initial_norm: 2.0, initial_seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct AttractorConfig {
    pub t_pullback: f64,
    pub rho0: f64,
    pub members: usize,
    pub ensemble_seed: u64,
    pub tau_list: Vec<f64>,
    pub n_omega: usize,
    /// Threshold for the probability table; the median of `d` at the first
    /// `tau` when absent.
    pub delta: Option<f64>,
    pub epsilon: f64,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            t_pullback: 20.0,
            rho0: 20.0,
            members: 32,
            ensemble_seed: 11,
            tau_list: vec![-2.0, -4.0, -8.0],
            n_omega: 10,
            delta: None,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Cut-off radii as fractions of the box length.
    pub radius_fractions: Vec<f64>,
    pub modes: Vec<usize>,
    pub t_back: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { radius_fractions: vec![1.0 / 8.0, 1.0 / 6.0, 0.25, 1.0 / 3.0], modes: vec![7, 33, 123, 257], t_back: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub physics: Physics,
    pub case: NoiseCase,
    pub dt: f64,
    pub forcing: ForcingConfig,
    /// Additive noise coefficient.
    pub g: ShapeConfig,
    pub noise: NoiseConfig,
    pub simulate: SimulateConfig,
    pub attractor: AttractorConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            physics: Physics::default(),
            case: NoiseCase::Multiplicative,
            dt: 0.05,
            forcing: ForcingConfig::default(),
            g: ShapeConfig::default(),
            noise: NoiseConfig::default(),
            simulate: SimulateConfig::default(),
            attractor: AttractorConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

/// The simulation objects a configuration resolves to.
pub struct Resolved {
    pub sim: SimConfig,
    pub forcing: ForcingProfile,
    pub admissibility: Admissibility,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::cube(self.grid.n, self.grid.length)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let grid = self.grid()?;
        if !(self.dt > 0.0) || !(self.noise.dt_path > 0.0) {
            return Err(Error::Config(format!("dt and noise.dt_path must be positive, got {}, {}", self.dt, self.noise.dt_path)));
        }
        let f = &self.forcing;
        let forcing = ForcingProfile::gaussian_curl(grid, f.amplitude, f.width, f.axis, self.forcing.mode.clone())?;
        let g = match self.case {
            NoiseCase::Additive => Some(
                ForcingProfile::gaussian_curl(grid, self.g.amplitude, self.g.width, self.g.axis, ForcingMode::Autonomous)?
                    .f_inf()
                    .clone(),
            ),
            NoiseCase::Multiplicative => None,
        };
        let p = &self.physics;
        let sim = SimConfig { mu: p.mu, alpha: p.alpha, beta: p.beta, r: p.r, sigma: p.sigma, case: self.case, g, grid, dt: self.dt };
        let admissibility = validate_config(&sim)?;
        Ok(Resolved { sim, forcing, admissibility })
    }

    /// Cut-off radii in box units.
    pub fn radii(&self) -> Vec<f64> {
        self.diagnostics.radius_fractions.iter().map(|q| q * self.grid.length).collect()
    }

    /// JSON schema of the configuration file.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(RunConfig)).expect("schema serializes")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json("{}").is_ok());
        let e = RunConfig::from_json(r#"{"physics": {"mew": 1.0}}"#).unwrap_err();
        assert!(e.to_string().contains("mew"), "{e}");
    }

    #[test]
    fn default_resolves_and_hash_is_stable() {
        let c = RunConfig::default();
        assert!(c.resolve().is_ok());
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn inadmissible_regime_is_a_config_error() {
        let mut c = RunConfig::default();
        c.physics.beta = 0.25;
        assert!(matches!(c.resolve(), Err(Error::Config(m)) if m.contains("2*beta*mu >= 1")));
    }
}
