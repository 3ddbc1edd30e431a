//! Integrating-factor Runge-Kutta time stepping, the cocycle and pullback runs.
//!
//! One step of size `dt` with `E = exp(-(mu |k|^2 + alpha) dt)`:
//!
//! ```text
//! N0 = N(u_n, t_n)
//! a  = E (u_n + dt N0)
//! N1 = N(a, t_n + dt)
//! u_{n+1} = E u_n + dt/2 (E N0 + N1)
//! ```
//!
//! The linear part is integrated exactly. When the explicit stiffness
//! estimate exceeds the CFL bound the step is split into two half-steps
//! (recursively), while the recorded time grid stays uniform.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::dynamics::{NoiseCase, Rhs, RhsStats, SimConfig};
use crate::error::{Error, Result};
use crate::field::{for_each_mode, SpectralField};
use crate::forcing::ForcingProfile;
use crate::grid::Wavenumbers;
use crate::ou::OUState;

/// `dt * lambda` bound for the explicit terms.
pub const CFL_NUMBER: f64 = 1.0;
/// Deepest recursive halving before the step is declared unstable.
pub const MAX_HALVINGS: u32 = 8;
/// Energies beyond this are treated as blow-up.
pub const BLOW_UP_ENERGY: f64 = 1e14;

/// OU sample path read on the physical clock: `y(t) = ou.y(t + offset)`.
#[derive(Debug, Clone)]
pub struct Drive {
    pub ou: OUState,
    pub offset: f64,
    pub seed: u64,
}

impl Drive {
    pub fn new(ou: OUState, offset: f64, seed: u64) -> Self {
        Self { ou, offset, seed }
    }

    #[inline]
    pub fn y(&self, t: f64) -> f64 {
        self.ou.y(t + self.offset)
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.ou.integral(a + self.offset, b + self.offset)
    }

    pub fn covers(&self, a: f64, b: f64) -> bool {
        self.ou.covers(a + self.offset, b + self.offset)
    }
}

/// Energy bookkeeping at one recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    /// `||u||^2`.
    pub energy: f64,
    /// `||grad u||^2`.
    pub grad: f64,
    /// `||w||^{r+1}_{L^{r+1}}` (`w = u`, or `u + g y` for additive noise).
    pub lr1: f64,
    /// `||w||^{r+1}_{L^{3(r+1)}}`.
    pub l3r1: f64,
    pub y: f64,
    /// `||f(t)||^2`.
    pub f_sq: f64,
    /// `<F(u), u>` for the full right-hand side `F`.
    pub fu: f64,
    /// `<F(u), A u>`.
    pub fau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Retention {
    /// Keep every `n`-th state (the step count must be a multiple of `n`).
    Every(usize),
    /// Keep the first and the last state only.
    Endpoints,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub retention: Retention,
    pub ledger: bool,
    /// Re-assert the energy pairing identities on every right-hand side.
    pub debug_checks: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { retention: Retention::Endpoints, ledger: false, debug_checks: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaRef {
    pub seed: u64,
    /// Path time minus physical time.
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub dt: f64,
    pub omega: OmegaRef,
    pub case: NoiseCase,
    pub tau: f64,
    pub ledger: Vec<LedgerRow>,
    /// Number of step splits forced by the CFL bound.
    pub halvings: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &SpectralField {
        &self.states[0]
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Reusable stepper: right-hand side workspace plus cached integrating factors.
pub struct Integrator {
    rhs: Rhs,
    k2: Vec<f64>,
    factors: HashMap<u64, Vec<f64>>,
    pub debug_checks: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    pub stats: RhsStats,
    pub halvings: usize,
}

impl Integrator {
    pub fn new(cfg: &SimConfig, forcing: &ForcingProfile) -> Result<Self> {
        let rhs = Rhs::new(cfg, forcing)?;
        let wn = Wavenumbers::new(&cfg.grid);
        let mut k2 = vec![0.0; cfg.grid.len()];
        for_each_mode(&cfg.grid, |idx, i, j, l| {
            let k = wn.kvec(i, j, l);
            k2[idx] = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        });
        Ok(Self { rhs, k2, factors: HashMap::new(), debug_checks: false })
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    pub fn rhs_mut(&mut self) -> &mut Rhs {
        &mut self.rhs
    }

    pub fn cfg(&self) -> &SimConfig {
        self.rhs.cfg()
    }

    fn factor(&mut self, dt: f64) -> &[f64] {
        let (mu, alpha) = (self.rhs.cfg().mu, self.rhs.cfg().alpha);
        let k2 = &self.k2;
        self.factors
            .entry(dt.to_bits())
            .or_insert_with(|| k2.iter().map(|k| (-(mu * k + alpha) * dt).exp()).collect())
    }

    fn apply_factor(e: &[f64], u: &mut SpectralField) {
        for c in 0..3 {
            for (x, f) in u.component_mut(c).iter_mut().zip(e) {
                *x *= *f;
            }
        }
    }

    fn check_pairings(&mut self, u: &SpectralField, y: f64) -> Result<()> {
        let cfg = self.rhs.cfg().clone();
        let mut w = u.clone();
        if cfg.case == NoiseCase::Additive {
            w.axpy(y, self.rhs.g())?;
        }
        let nl = crate::field::Nonlinear::new(cfg.grid).evaluate(&w, cfg.r);
        let scale = (w.norm() * (w.norm_sq() + w.grad_norm_sq())).max(f64::MIN_POSITIVE);
        let b = nl.b.inner(&w)?.abs() / scale;
        let c = (nl.c.inner(&w)? - nl.lr1).abs() / nl.lr1.max(f64::MIN_POSITIVE);
        if b > 1e-9 || (nl.lr1 > 0.0 && c > 1e-9) {
            return Err(Error::Integrity(format!(
                "energy pairing identities violated: relative <B(u),u> = {b:e}, <C(u),u> defect = {c:e}"
            )));
        }
        Ok(())
    }

    /// Explicit terms and their statistics at `(u, t)`.
    pub fn explicit(&mut self, u: &SpectralField, t: f64, drive: &Drive) -> (SpectralField, RhsStats) {
        self.rhs.explicit(u, t, drive.y(t))
    }

    fn step_inner(
        &mut self,
        u: &SpectralField,
        t: f64,
        dt: f64,
        drive: &Drive,
        n0: Option<(SpectralField, RhsStats)>,
        depth: u32,
    ) -> Result<(SpectralField, StepInfo)> {
        let (n0, stats) = match n0 {
            Some(v) => v,
            None => self.explicit(u, t, drive),
        };
        if self.debug_checks {
            self.check_pairings(u, drive.y(t))?;
        }
        if stats.lambda * dt > CFL_NUMBER {
            if depth >= MAX_HALVINGS {
                return Err(Error::BlowUp { time: t, last_energy: u.norm_sq() });
            }
            let h = 0.5 * dt;
            let (mid, a) = self.step_inner(u, t, h, drive, Some((n0, stats)), depth + 1)?;
            let (end, b) = self.step_inner(&mid, t + h, h, drive, None, depth + 1)?;
            return Ok((end, StepInfo { stats, halvings: 1 + a.halvings + b.halvings }));
        }
        let e = self.factor(dt).to_vec();
        let mut a = u.clone();
        a.axpy(dt, &n0)?;
        Self::apply_factor(&e, &mut a);
        let (n1, _) = self.explicit(&a, t + dt, drive);
        let mut out = u.clone();
        out.axpy(dt, &n0)?;
        Self::apply_factor(&e, &mut out);
        // out = E u + E dt N0; subtract half of E dt N0 and add dt/2 N1.
        let mut en0 = n0;
        Self::apply_factor(&e, &mut en0);
        out.axpy(-0.5 * dt, &en0)?;
        out.axpy(0.5 * dt, &n1)?;
        let energy = out.norm_sq();
        if !energy.is_finite() || energy > BLOW_UP_ENERGY {
            return Err(Error::BlowUp { time: t + dt, last_energy: u.norm_sq() });
        }
        Ok((out, StepInfo { stats, halvings: 0 }))
    }

    /// Advance `u` from `t` to `t + dt`.
    pub fn step(&mut self, u: &SpectralField, t: f64, dt: f64, drive: &Drive) -> Result<(SpectralField, StepInfo)> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        self.step_inner(u, t, dt, drive, None, 0)
    }

    fn ledger_row(&self, u: &SpectralField, n: &SpectralField, stats: &RhsStats, t: f64, y: f64) -> LedgerRow {
        let cfg = self.rhs.cfg();
        let energy = u.norm_sq();
        let grad = u.grad_norm_sq();
        let au = u.stokes_apply();
        let s = u.stokes_norm_sq();
        let nu = n.inner(u).expect("grid");
        let nau = n.inner(&au).expect("grid");
        LedgerRow {
            t,
            energy,
            grad,
            lr1: stats.lr1,
            l3r1: stats.l3r1.cbrt(),
            y,
            f_sq: self.rhs.forcing().norm_sq_at(t),
            fu: nu - cfg.mu * grad - cfg.alpha * energy,
            fau: nau - cfg.mu * s - cfg.alpha * grad,
        }
    }

    /// Run `[tau, tau + horizon]` from `u_tau`.
    pub fn evolve(
        &mut self,
        u_tau: &SpectralField,
        tau: f64,
        horizon: f64,
        drive: &Drive,
        opts: EvolveOptions,
    ) -> Result<Trajectory> {
        let cfg = self.rhs.cfg().clone();
        cfg.grid.check_same(u_tau.grid())?;
        if horizon < 0.0 {
            return Err(Error::Domain(format!("horizon must be nonnegative, got {horizon}")));
        }
        let dt = cfg.dt;
        let q = horizon / dt;
        let n = q.round() as usize;
        if (q - n as f64).abs() > 1e-9 * q.max(1.0) {
            return Err(Error::Config(format!("horizon {horizon} is not a multiple of dt = {dt}")));
        }
        if !drive.covers(tau, tau + horizon) {
            return Err(Error::Range(format!(
                "noise path does not cover [{}, {}] on its own clock",
                tau + drive.offset,
                tau + horizon + drive.offset
            )));
        }
        let stride = match opts.retention {
            Retention::Every(s) => {
                if s == 0 || !n.is_multiple_of(s) {
                    return Err(Error::Config(format!("{n} steps are not a multiple of stride {s}")));
                }
                Some(s)
            }
            Retention::Endpoints => None,
        };
        let time = |i: usize| tau + i as f64 * dt;
        self.debug_checks = opts.debug_checks;
        let mut traj = Trajectory {
            times: vec![tau],
            states: vec![u_tau.clone()],
            dt: stride.map_or(horizon, |s| s as f64 * dt),
            omega: OmegaRef { seed: drive.seed, offset: drive.offset },
            case: cfg.case,
            tau,
            ledger: Vec::new(),
            halvings: 0,
        };
        let mut u = u_tau.clone();
        for i in 0..n {
            let t = time(i);
            let pre = self.explicit(&u, t, drive);
            if opts.ledger {
                let row = self.ledger_row(&u, &pre.0, &pre.1, t, drive.y(t));
                traj.ledger.push(row);
            }
            let (next, info) = self.step_inner(&u, t, dt, drive, Some(pre), 0)?;
            traj.halvings += info.halvings;
            u = next;
            if let Some(s) = stride {
                if (i + 1).is_multiple_of(s) {
                    traj.times.push(time(i + 1));
                    traj.states.push(u.clone());
                }
            }
        }
        if opts.ledger {
            let t = time(n);
            let (nf, st) = self.explicit(&u, t, drive);
            let row = self.ledger_row(&u, &nf, &st, t, drive.y(t));
            traj.ledger.push(row);
        }
        if stride.is_none() && n > 0 {
            traj.times.push(time(n));
            traj.states.push(u);
        }
        Ok(traj)
    }

    /// `Phi(t, tau, omega, v)`: original variables in and out, with the noise
    /// read as `y(theta_{s - tau} omega)` at physical time `s`.
    pub fn cocycle_phi(&mut self, t: f64, tau: f64, ou: &OUState, seed: u64, v_tau: &SpectralField) -> Result<SpectralField> {
        let drive = Drive::new(ou.clone(), -tau, seed);
        let u0 = self.rhs.from_original(v_tau, drive.y(tau));
        if t == 0.0 {
            return Ok(v_tau.clone());
        }
        let traj = self.evolve(&u0, tau, t, &drive, EvolveOptions::default())?;
        Ok(self.rhs.to_original(traj.last(), drive.y(tau + t)))
    }
}

/// One step with a freshly built integrator.
pub fn step(u: &SpectralField, t: f64, dt: f64, drive: &Drive, cfg: &SimConfig, forcing: &ForcingProfile) -> Result<SpectralField> {
    Ok(Integrator::new(cfg, forcing)?.step(u, t, dt, drive)?.0)
}

pub fn evolve(
    u_tau: &SpectralField,
    tau: f64,
    horizon: f64,
    drive: &Drive,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    opts: EvolveOptions,
) -> Result<Trajectory> {
    Integrator::new(cfg, forcing)?.evolve(u_tau, tau, horizon, drive, opts)
}

pub fn cocycle_phi(
    t: f64,
    tau: f64,
    ou: &OUState,
    seed: u64,
    v_tau: &SpectralField,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
) -> Result<SpectralField> {
    Integrator::new(cfg, forcing)?.cocycle_phi(t, tau, ou, seed, v_tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub tau: f64,
    pub gap: f64,
}

/// `|| u(T + tau, tau, theta_{-tau} omega, u_tau) - u_inf(T, omega, u0) ||` per `tau`,
/// where `u_inf` is driven by the autonomous limit of the forcing.
pub fn backward_convergence_experiment(
    horizon: f64,
    tau_list: &[f64],
    ou: &OUState,
    seed: u64,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    u_tau: &SpectralField,
    u0_limit: &SpectralField,
) -> Result<Vec<GapRow>> {
    let mut lim = Integrator::new(cfg, &forcing.limit())?;
    let reference = lim.evolve(u0_limit, 0.0, horizon, &Drive::new(ou.clone(), 0.0, seed), EvolveOptions::default())?;
    let mut na = Integrator::new(cfg, forcing)?;
    tau_list
        .iter()
        .map(|&tau| {
            let tr = na.evolve(u_tau, tau, horizon, &Drive::new(ou.clone(), -tau, seed), EvolveOptions::default())?;
            Ok(GapRow { tau, gap: tr.last().sub(reference.last())?.norm() })
        })
        .collect()
}
