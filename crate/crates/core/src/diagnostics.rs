//! Quantitative functionals of the estimates: absorbing integrals, exterior
//! mass, spectral flattening remainders and per-step inequality ledgers.

use serde::{Deserialize, Serialize};

use crate::constants::FrozenConstants;
use crate::cutoff::{self, MassPartition};
use crate::dynamics::{NoiseCase, SimConfig};
use crate::error::{Error, Result};
use crate::field::{for_each_mode, Nonlinear, SpectralField};
use crate::forcing::ForcingProfile;
use crate::grid::Wavenumbers;
use crate::integrator::LedgerRow;
use crate::ou::OUState;

/// Truncated improper integral with an estimate of the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedIntegral {
    pub value: f64,
    /// Integrand at the cut divided by `alpha`: the tail if the integrand kept
    /// decaying at the rate `e^{alpha zeta}` beyond it.
    pub tail_bound: f64,
}

/// `y_1 = |y|^2 + |y|^{r+1} + |y|^{2(r+1)/(r-1)}`.
pub fn y1(y: f64, r: f64) -> f64 {
    let a = y.abs();
    a * a + a.powf(r + 1.0) + a.powf(2.0 * (r + 1.0) / (r - 1.0))
}

/// `y_2 = |y|^2 + |y|^{r+1}`.
pub fn y2(y: f64, r: f64) -> f64 {
    let a = y.abs();
    a * a + a.powf(r + 1.0)
}

/// Absorbing integral at forcing time `s`, by the trapezoid rule on the OU nodes
/// over `[-t_back, 0]`:
///
/// * multiplicative: `K(s) = int e^{alpha z + 2|y(z)| + 2 sigma int_z^0 y} ||f(z+s)||^2 dz`,
/// * additive: `K~(s) = int e^{alpha z} (||f(z+s)||^2 + y_1(z)) dz`.
pub fn absorbing_integral(ou: &OUState, s: f64, forcing: &ForcingProfile, cfg: &SimConfig, t_back: f64) -> Result<TruncatedIntegral> {
    if !(t_back > 0.0) {
        return Err(Error::Domain(format!("t_back must be positive, got {t_back}")));
    }
    if !ou.covers(-t_back, 0.0) {
        return Err(Error::Range(format!(
            "absorbing integral needs the noise path on [{}, 0], have [{}, {}]",
            -t_back,
            ou.t_min(),
            ou.t_max()
        )));
    }
    let h = ou.dt();
    let n = (t_back / h).round() as usize;
    let integrand = |z: f64| -> f64 {
        let f2 = forcing.norm_sq_at(z + s);
        let y = ou.y(z);
        match cfg.case {
            NoiseCase::Multiplicative => {
                (cfg.alpha * z + 2.0 * y.abs() + 2.0 * cfg.sigma * ou.integral(z, 0.0)).exp() * f2
            }
            NoiseCase::Additive => (cfg.alpha * z).exp() * (f2 + y1(y, cfg.r)),
        }
    };
    let mut acc = 0.0;
    for i in 0..=n {
        let z = -(i as f64) * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * integrand(z);
    }
    let cut = -(n as f64) * h;
    Ok(TruncatedIntegral { value: acc * h, tail_bound: integrand(cut) / cfg.alpha })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingRadius {
    pub tau: f64,
    /// `sup_{s <= tau} K(s)` over the sampled `s`.
    pub sup_k: f64,
    pub tail_bound: f64,
    /// Squared radius of the absorbing ball in the original variable:
    /// `(4/alpha) e^{2 y(0)} sup K` (multiplicative) or `2 R sup K~` (additive).
    pub radius_sq: f64,
}

/// Absorbing radius at `tau`, taking the sup over `s_grid` entries `<= tau`.
pub fn absorbing_radius(
    ou: &OUState,
    tau: f64,
    s_grid: &[f64],
    forcing: &ForcingProfile,
    cfg: &SimConfig,
    t_back: f64,
    constants: &FrozenConstants,
) -> Result<AbsorbingRadius> {
    let mut sup_k = f64::NEG_INFINITY;
    let mut tail = 0.0f64;
    for &s in s_grid.iter().filter(|&&s| s <= tau).chain(std::iter::once(&tau)) {
        let k = absorbing_integral(ou, s, forcing, cfg, t_back)?;
        if k.value > sup_k {
            sup_k = k.value;
            tail = k.tail_bound;
        }
    }
    let radius_sq = match cfg.case {
        NoiseCase::Multiplicative => 4.0 / cfg.alpha * (2.0 * ou.y(0.0)).exp() * sup_k,
        NoiseCase::Additive => 2.0 * constants.r_ei1a * sup_k,
    };
    Ok(AbsorbingRadius { tau, sup_k, tail_bound: tail, radius_sq })
}

/// Smallest horizon on `t_grid` after which the initial-data term is dominated:
/// `e^{-alpha t + 2 sigma int_{-t}^0 y} sup||u_0||^2 <= (2/alpha) K`, where
/// `u0_sq(t)` is the squared radius of the pulled-back initial family at horizon `t`.
pub fn absorption_time(ou: &OUState, cfg: &SimConfig, k: f64, t_grid: &[f64], u0_sq: impl Fn(f64) -> f64) -> Option<f64> {
    let ok = |t: f64| {
        let lhs = (-cfg.alpha * t + 2.0 * cfg.sigma * ou.integral(-t, 0.0)).exp() * u0_sq(t);
        lhs <= 2.0 / cfg.alpha * k
    };
    let mut answer = None;
    for &t in t_grid.iter().rev() {
        if ok(t) {
            answer = Some(t);
        } else {
            break;
        }
    }
    answer
}

/// `int_{-t_back}^0 e^{k2 |y| + (alpha/k1) z - (k1 - 2) sigma int_z^0 y} dz`,
/// the path-only factor in the higher-moment bounds.
pub fn moment_weight(ou: &OUState, cfg: &SimConfig, k1: f64, k2: f64, t_back: f64) -> Result<f64> {
    if !(k1 > 2.0) || k2 < 0.0 {
        return Err(Error::Domain(format!("need k1 > 2 and k2 >= 0, got {k1}, {k2}")));
    }
    if !ou.covers(-t_back, 0.0) {
        return Err(Error::Range("moment weight needs the noise path on [-t_back, 0]".into()));
    }
    let h = ou.dt();
    let n = (t_back / h).round() as usize;
    let mut acc = 0.0;
    for i in 0..=n {
        let z = -(i as f64) * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w
            * (k2 * ou.y(z).abs() + cfg.alpha / k1 * z - (k1 - 2.0) * cfg.sigma * ou.integral(z, 0.0)).exp();
    }
    Ok(acc * h)
}

/// `int rho(|x|^2/k^2) |u|^2 dx` on the padded lattice; `k <= L/3`.
pub fn tail_mass(u: &SpectralField, k_radius: f64) -> Result<f64> {
    Ok(mass_partition(u, k_radius)?.tail)
}

pub fn mass_partition(u: &SpectralField, k_radius: f64) -> Result<MassPartition> {
    let phys = Nonlinear::new(*u.grid()).padded_physical(&u.dealiased());
    cutoff::partition(&phys, k_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flattening {
    pub modes: usize,
    /// `||(I - P_i) u_bar||^2`.
    pub remainder: f64,
    /// `||u_bar||^2`.
    pub total: f64,
    /// `||grad u_bar||^2`.
    pub grad_sq: f64,
    /// `(i+1)`-th smallest `|k|^2`; infinite when every mode is retained.
    pub lambda_next: f64,
}

impl Flattening {
    /// `||grad u_bar||^2 / lambda_{i+1}`.
    pub fn gap_bound(&self) -> f64 {
        if self.lambda_next.is_infinite() {
            0.0
        } else if self.lambda_next == 0.0 {
            f64::INFINITY
        } else {
            self.grad_sq / self.lambda_next
        }
    }
}

/// Remainder of `u_bar` after projecting on its `i` lowest-`|k|^2` lattice modes
/// (ties broken by FFT index).
pub fn spectral_remainder(ubar: &SpectralField, i: usize) -> Result<Flattening> {
    let grid = *ubar.grid();
    let n = grid.len();
    if i > n {
        return Err(Error::Range(format!("{i} modes requested, grid has {n}")));
    }
    let wn = Wavenumbers::new(&grid);
    let mut k2 = vec![0.0; n];
    let mut mass = vec![0.0; n];
    for_each_mode(&grid, |idx, a, b, c| {
        let k = wn.kvec(a, b, c);
        k2[idx] = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        mass[idx] = (0..3).map(|d| ubar.component(d)[idx].norm_sqr()).sum::<f64>();
    });
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| k2[a].total_cmp(&k2[b]).then(a.cmp(&b)));
    let vol = grid.volume();
    let remainder = order[i..].iter().map(|&j| mass[j]).sum::<f64>() * vol;
    Ok(Flattening {
        modes: i,
        remainder,
        total: mass.iter().sum::<f64>() * vol,
        grad_sq: mass.iter().zip(&k2).map(|(m, k)| m * k).sum::<f64>() * vol,
        lambda_next: order.get(i).map_or(f64::INFINITY, |&j| k2[j]),
    })
}

/// Flatten `u` with `1 - rho(|x|^2/k^2)` on its own lattice and measure the
/// spectral remainder beyond the `i` lowest modes.
pub fn flattening_remainder(u: &SpectralField, k_radius: f64, i: usize) -> Result<Flattening> {
    let phys = u.to_physical();
    let bar = cutoff::flatten_weight(&phys, k_radius)?;
    spectral_remainder(&SpectralField::from_physical(&bar), i)
}

/// One step of the inequality residual report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerStep {
    pub t: f64,
    /// Energy inequality residual (positive means violated).
    pub ei1: f64,
    /// Time-discretization defect of the energy identity over the step.
    pub ei1_defect: f64,
    /// Gradient inequality residual with frozen constants.
    pub ei2: f64,
    pub ei2_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub case: NoiseCase,
    pub steps: Vec<LedgerStep>,
    pub max_ei1: f64,
    pub max_ei2: f64,
    pub max_ei1_defect: f64,
    pub max_ei2_defect: f64,
    /// Steps where a residual exceeds its own discretization defect plus roundoff.
    pub ei1_breaches: usize,
    pub ei2_breaches: usize,
}

/// Slack for rounding in ledger comparisons, relative to the largest term.
pub const LEDGER_ROUNDOFF: f64 = 1e-9;

/// Pointwise-in-time parts of each inequality: the left side without the time
/// derivative (`lhs`) and the right side (`rhs`), so that
/// `d/dt X + lhs <= rhs` is the claimed inequality.
fn terms(row: &LedgerRow, cfg: &SimConfig, k: &FrozenConstants) -> ([f64; 2], [f64; 2], f64) {
    let (a, s, m, b, r) = (cfg.alpha, cfg.sigma, cfg.mu, cfg.beta, cfg.r);
    let y = row.y;
    match cfg.case {
        NoiseCase::Multiplicative => {
            let ery = ((r - 1.0) * y).exp();
            let e2 = (2.0 * y.abs()).exp();
            let l1 = (1.5 * a - 2.0 * s * y) * row.energy + 2.0 * m * row.grad + 2.0 * b * ery * row.lr1;
            let r1 = 2.0 / a * e2 * row.f_sq;
            let l2 = (a - 2.0 * s * y) * row.grad + k.c_star * ery * row.l3r1;
            let r2 = k.c_ei4 * row.grad + k.c_ei4 * e2 * row.f_sq;
            let scale = l1.abs().max(r1).max(l2.abs()).max(r2).max(row.fu.abs()).max(row.fau.abs());
            ([l1, l2], [r1, r2], scale)
        }
        NoiseCase::Additive => {
            let l1 = 1.5 * a * row.energy + m * row.grad + b * row.lr1;
            let r1 = k.r_ei1a * (row.f_sq + y1(y, r));
            let l2 = a * row.grad + 0.5 * k.c_star * row.l3r1;
            let r2 = k.r_ei2a * (row.f_sq + row.energy + row.grad + row.lr1 + y2(y, r));
            let scale = l1.abs().max(r1).max(l2.abs()).max(r2).max(row.fu.abs()).max(row.fau.abs());
            ([l1, l2], [r1, r2], scale)
        }
    }
}

/// Per-step residuals of the energy and gradient inequalities along a recorded ledger.
pub fn inequality_ledger(rows: &[LedgerRow], cfg: &SimConfig, constants: &FrozenConstants) -> LedgerReport {
    let mut steps = Vec::with_capacity(rows.len().saturating_sub(1));
    let (mut b1, mut b2) = (0, 0);
    for w in rows.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let dt = q.t - p.t;
        let (lp, rp, sp) = terms(p, cfg, constants);
        let (lq, rq, sq) = terms(q, cfg, constants);
        let de = (q.energy - p.energy) / dt;
        let dg = (q.grad - p.grad) / dt;
        let ei1 = de + 0.5 * (lp[0] - rp[0] + lq[0] - rq[0]);
        let ei2 = dg + 0.5 * (lp[1] - rp[1] + lq[1] - rq[1]);
        let d1 = de - (p.fu + q.fu);
        let d2 = dg - (p.fau + q.fau);
        let tol = LEDGER_ROUNDOFF * sp.max(sq).max(de.abs()).max(dg.abs());
        if ei1 > d1.abs() + tol {
            b1 += 1;
        }
        if ei2 > d2.abs() + tol {
            b2 += 1;
        }
        steps.push(LedgerStep { t: p.t, ei1, ei1_defect: d1, ei2, ei2_defect: d2 });
    }
    let max = |f: fn(&LedgerStep) -> f64| steps.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    LedgerReport {
        case: cfg.case,
        max_ei1: max(|s| s.ei1),
        max_ei2: max(|s| s.ei2),
        max_ei1_defect: max(|s| s.ei1_defect.abs()),
        max_ei2_defect: max(|s| s.ei2_defect.abs()),
        ei1_breaches: b1,
        ei2_breaches: b2,
        steps,
    }
}

/// Constants fitted on a baseline ledger: the largest pointwise ratio each
/// inequality needs, times `safety`.
pub fn calibrate_constants(mult: &[LedgerRow], add: &[LedgerRow], cfg: &SimConfig, c_star: f64, safety: f64) -> FrozenConstants {
    let (a, s, r) = (cfg.alpha, cfg.sigma, cfg.r);
    let ratio = |num: f64, den: f64| if den > 1e-300 { num / den } else { 0.0 };
    let mut c = 0.0f64;
    for row in mult {
        let y = row.y;
        let ery = ((r - 1.0) * y).exp();
        let num = 2.0 * row.fau + (a - 2.0 * s * y) * row.grad + c_star * ery * row.l3r1;
        c = c.max(ratio(num, row.grad + (2.0 * y.abs()).exp() * row.f_sq));
    }
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    for row in add {
        let y = row.y;
        let num1 = 2.0 * row.fu + 1.5 * a * row.energy + cfg.mu * row.grad + cfg.beta * row.lr1;
        r1 = r1.max(ratio(num1, row.f_sq + y1(y, r)));
        let num2 = 2.0 * row.fau + a * row.grad + 0.5 * c_star * row.l3r1;
        r2 = r2.max(ratio(num2, row.f_sq + row.energy + row.grad + row.lr1 + y2(y, r)));
    }
    FrozenConstants {
        c_ei4: safety * c,
        c_star,
        r_ei1a: safety * r1,
        r_ei2a: safety * r2,
        c_rho: cutoff::C_RHO,
    }
}

/// Uniform-integrability and tail functionals of the forcing at one `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingFunctionals {
    pub kappa: f64,
    /// `sup_{s<=tau} int_{-inf}^s e^{kappa(xi-s)} ||f(xi)||^2`.
    pub uniform_integrability: f64,
    /// Same with `||f||^2` replaced by the mass of `f` in `|x| >= k`, per radius.
    pub tails: [f64; 4],
}

/// Forcing functionals for `kappa in {alpha/2, alpha, 2 alpha}` at the given exterior radii.
pub fn forcing_functionals(forcing: &ForcingProfile, cfg: &SimConfig, tau: f64, radii: [f64; 4]) -> Result<Vec<ForcingFunctionals>> {
    let n2 = forcing.f_inf().norm_sq();
    let phys = Nonlinear::new(cfg.grid).padded_physical(forcing.f_inf());
    let ext: Vec<f64> = radii
        .iter()
        .map(|&k| cutoff::partition(&phys, k).map(|p| p.total - p.interior))
        .collect::<Result<_>>()?;
    [0.5 * cfg.alpha, cfg.alpha, 2.0 * cfg.alpha]
        .iter()
        .map(|&kappa| {
            let mut tails = [0.0; 4];
            for (t, e) in tails.iter_mut().zip(&ext) {
                *t = forcing.weighted_history(kappa, tau, *e)?;
            }
            Ok(ForcingFunctionals { kappa, uniform_integrability: forcing.weighted_history(kappa, tau, n2)?, tails })
        })
        .collect()
}

/// Everything recorded about one state at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub grad: f64,
    pub lr1: f64,
    pub k_value: f64,
    pub tail_mass: Vec<(f64, f64)>,
    pub flatten_remainder: Vec<(usize, f64)>,
}

pub fn diagnostics_record(
    u: &SpectralField,
    t: f64,
    cfg: &SimConfig,
    k_value: f64,
    radii: &[f64],
    modes: &[usize],
) -> Result<DiagnosticsRecord> {
    let norms = crate::field::compute_norms(u, cfg.r, cfg.grid.length)?;
    let tail_mass = radii.iter().map(|&k| Ok((k, tail_mass(u, k)?))).collect::<Result<Vec<_>>>()?;
    let k_flat = radii.last().copied().unwrap_or(cfg.grid.length / 4.0);
    let flatten_remainder = modes
        .iter()
        .map(|&i| Ok((i, flattening_remainder(u, k_flat, i)?.remainder)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsRecord {
        t,
        energy: norms.h_norm.powi(2),
        grad: norms.grad_norm.powi(2),
        lr1: norms.lp_norm.powf(cfg.r + 1.0),
        k_value,
        tail_mass,
        flatten_remainder,
    })
}
