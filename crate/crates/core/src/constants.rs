//! Constants frozen from the baseline calibration run, and the tolerances the
//! checks use.

use serde::{Deserialize, Serialize};

/// Constants of the gradient and additive energy inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenConstants {
    /// `C` in the multiplicative gradient inequality.
    pub c_ei4: f64,
    /// `C*`, the coefficient kept on the `L^{3(r+1)}` term.
    pub c_star: f64,
    /// `R` in the additive energy inequality.
    pub r_ei1a: f64,
    /// `R~` in the additive gradient inequality.
    pub r_ei2a: f64,
    /// Bound on `|rho'|` for the cut-off.
    pub c_rho: f64,
}

impl Default for FrozenConstants {
    fn default() -> Self {
        FROZEN
    }
}

/// Output of `cbf calibrate` on the default configuration, copied here.
pub const FROZEN: FrozenConstants = FrozenConstants {
    c_ei4: 0.577,
    c_star: 0.01,
    r_ei1a: 1.331,
    r_ei2a: 0.421,
    c_rho: crate::cutoff::C_RHO,
};

/// Safety factor applied to the calibrated ratios.
pub const CALIBRATION_SAFETY: f64 = 2.0;

/// `C*` as a multiple of `beta`.
pub const C_STAR_PER_BETA: f64 = 1e-2;

/// Gronwall fit for the autonomy bound `d(tau) <= C e^Lambda sqrt(int ||f - f_inf||^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutonomyFit {
    pub c: f64,
    pub lambda: f64,
}

pub const AUTONOMY_FIT: AutonomyFit = AutonomyFit { c: 1.0, lambda: 0.0 };

/// Tolerances used across checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub solenoidal: f64,
    pub pairing: f64,
    pub ledger_roundoff: f64,
    pub absorbing_margin: f64,
    pub autonomy_floor: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    solenoidal: 1e-12,
    pairing: 1e-9,
    ledger_roundoff: crate::diagnostics::LEDGER_ROUNDOFF,
    absorbing_margin: 0.05,
    autonomy_floor: 1e-6,
};
