//! Finite point-cloud sections of pullback attractors and the distances used
//! to study their approach to the autonomous limit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::forcing::ForcingProfile;
use crate::grid::Grid;
use crate::integrator::{Drive, EvolveOptions, Integrator};
use crate::ou::{ou_evaluate, split_seed, OUState, WienerPath};

/// One noise realization: seed plus its OU process on a two-sided grid.
#[derive(Debug, Clone)]
pub struct Omega {
    pub seed: u64,
    pub ou: OUState,
}

impl Omega {
    pub fn sample(seed: u64, t_back: f64, t_fwd: f64, dt_path: f64, sigma: f64) -> Result<Self> {
        let path = WienerPath::sample(seed, -t_back, t_fwd, dt_path)?;
        Ok(Self { seed, ou: ou_evaluate(&path, sigma)? })
    }

    /// The same path with `y` forced to zero.
    pub fn quiet(seed: u64, t_back: f64, t_fwd: f64, dt_path: f64, sigma: f64) -> Result<Self> {
        let path = WienerPath::sample(seed, -t_back, t_fwd, dt_path)?;
        Ok(Self { seed, ou: OUState::zero(&path, sigma) })
    }
}

/// Initial-data family: the origin plus `members - 1` random solenoidal fields
/// with norms spread evenly up to `rho0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub rho0: f64,
    pub members: usize,
    pub seed: u64,
}

impl Ensemble {
    pub fn new(rho0: f64, members: usize, seed: u64) -> Result<Self> {
        if members == 0 || !(rho0 >= 0.0) {
            return Err(Error::Config(format!("ensemble needs members >= 1 and rho0 >= 0, got {members}, {rho0}")));
        }
        Ok(Self { rho0, members, seed })
    }

    pub fn initial_data(&self, grid: Grid) -> Vec<SpectralField> {
        let mut out = vec![SpectralField::zeros(grid)];
        let last = (self.members - 1).max(1) as f64;
        for j in 1..self.members {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(self.seed, j as u64));
            out.push(SpectralField::random_solenoidal(grid, &mut rng, self.rho0 * j as f64 / last));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AttractorSection {
    pub tau: f64,
    pub omega_seed: u64,
    pub pullback_horizon: f64,
    pub ensemble: Ensemble,
    /// Endpoints in the original variable.
    pub points: Vec<SpectralField>,
    pub halvings: usize,
}

impl AttractorSection {
    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| dist(&self.points[i], &self.points[j]))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest point norm.
    pub fn sup_norm(&self) -> f64 {
        self.points.iter().map(SpectralField::norm).fold(0.0, f64::max)
    }
}

fn dist(a: &SpectralField, b: &SpectralField) -> f64 {
    a.sub(b).map(|d| d.norm()).unwrap_or(f64::NAN)
}

/// Run the ensemble from `tau - t` to `tau` with the noise read on path times
/// `[offset_end - t, offset_end]`, where `offset_end = tau + drive_offset`.
fn run_section(
    tau: f64,
    drive_offset: f64,
    omega: &Omega,
    t: f64,
    ensemble: &Ensemble,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
) -> Result<AttractorSection> {
    let drive = Drive::new(omega.ou.clone(), drive_offset, omega.seed);
    let start = tau - t;
    if !drive.covers(start, tau) {
        return Err(Error::Range(format!(
            "pullback horizon {t} at tau = {tau} needs the noise path on [{}, {}]",
            start + drive_offset,
            tau + drive_offset
        )));
    }
    let init = ensemble.initial_data(cfg.grid);
    let runs: Vec<Result<(SpectralField, usize)>> = init
        .par_iter()
        .map(|u0| {
            let mut integ = Integrator::new(cfg, forcing)?;
            let v0 = integ.rhs().from_original(u0, drive.y(start));
            let tr = integ.evolve(&v0, start, t, &drive, EvolveOptions::default())?;
            Ok((integ.rhs().to_original(tr.last(), drive.y(tau)), tr.halvings))
        })
        .collect();
    let mut points = Vec::with_capacity(runs.len());
    let mut halvings = 0;
    for r in runs {
        let (p, h) = r?;
        points.push(p);
        halvings += h;
    }
    Ok(AttractorSection { tau, omega_seed: omega.seed, pullback_horizon: t, ensemble: *ensemble, points, halvings })
}

/// Endpoints of `Phi(t, tau - t, theta_{-t} omega, u0)` over the ensemble: the
/// noise is read at path times `[-t, 0]`, the forcing at physical times `[tau - t, tau]`.
pub fn pullback_section(
    tau: f64,
    omega: &Omega,
    t: f64,
    ensemble: &Ensemble,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
) -> Result<AttractorSection> {
    run_section(tau, -tau, omega, t, ensemble, cfg, forcing)
}

/// `max_{a in A} min_{b in B} ||a - b||`.
pub fn hausdorff_semidist(a: &[SpectralField], b: &[SpectralField]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("semi-distance needs nonempty point sets".into()));
    }
    for p in a.iter().chain(b) {
        a[0].grid().check_same(p.grid())?;
    }
    Ok(a
        .par_iter()
        .map(|p| b.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max))
}

/// Symmetric Hausdorff distance.
pub fn hausdorff_dist(a: &[SpectralField], b: &[SpectralField]) -> Result<f64> {
    Ok(hausdorff_semidist(a, b)?.max(hausdorff_semidist(b, a)?))
}

/// Section at horizons `t` and `2t` and their Hausdorff distance.
#[derive(Debug, Clone)]
pub struct CauchyCheck {
    pub short: AttractorSection,
    pub long: AttractorSection,
    pub gap: f64,
    /// Diameter change between the horizons, relative to the longer one.
    pub diameter_change: f64,
    /// Diameter change below `tol`; a failure is reported, not raised.
    pub stabilized: bool,
}

pub fn cauchy_in_t(
    tau: f64,
    omega: &Omega,
    t: f64,
    ensemble: &Ensemble,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    tol: f64,
) -> Result<CauchyCheck> {
    let short = pullback_section(tau, omega, t, ensemble, cfg, forcing)?;
    let long = pullback_section(tau, omega, 2.0 * t, ensemble, cfg, forcing)?;
    let gap = hausdorff_dist(&short.points, &long.points)?;
    let (ds, dl) = (short.diameter(), long.diameter());
    let diameter_change = (ds - dl).abs() / dl.max(f64::MIN_POSITIVE);
    Ok(CauchyCheck { stabilized: (ds - dl).abs() <= tol * dl.max(1.0), short, long, gap, diameter_change })
}

/// One row of an autonomy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutonomyRow {
    pub tau: f64,
    pub d: f64,
    pub n_points: usize,
    pub t_pullback: f64,
    pub floor_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutonomyCurve {
    pub omega_seed: u64,
    pub rows: Vec<AutonomyRow>,
}

/// `d(tau) = dist(section(tau), section_inf)` per `tau`, where `section_inf`
/// is driven by the autonomous limit. The floor is the distance between the
/// limit sections at horizons `t` and `t/2`.
pub fn autonomy_curve(
    tau_list: &[f64],
    omega: &Omega,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    t_pullback: f64,
    ensemble: &Ensemble,
) -> Result<AutonomyCurve> {
    Ok(autonomy_curve_sections(tau_list, omega, cfg, forcing, t_pullback, ensemble)?.0)
}

/// As [`autonomy_curve`], also returning the sections: one per `tau`, then the limit section.
pub fn autonomy_curve_sections(
    tau_list: &[f64],
    omega: &Omega,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    t_pullback: f64,
    ensemble: &Ensemble,
) -> Result<(AutonomyCurve, Vec<AttractorSection>)> {
    let lim = forcing.limit();
    let inf = pullback_section(0.0, omega, t_pullback, ensemble, cfg, &lim)?;
    let half = pullback_section(0.0, omega, 0.5 * t_pullback, ensemble, cfg, &lim)?;
    let floor = hausdorff_dist(&inf.points, &half.points)?;
    let mut rows = Vec::with_capacity(tau_list.len());
    let mut sections = Vec::with_capacity(tau_list.len() + 1);
    for &tau in tau_list {
        let sec = pullback_section(tau, omega, t_pullback, ensemble, cfg, forcing)?;
        rows.push(AutonomyRow {
            tau,
            d: hausdorff_semidist(&sec.points, &inf.points)?,
            n_points: sec.points.len(),
            t_pullback,
            floor_estimate: floor,
        });
        sections.push(sec);
    }
    sections.push(inf);
    Ok((AutonomyCurve { omega_seed: omega.seed, rows }, sections))
}

/// Gronwall-type envelope `C e^Lambda (int_{-inf}^tau ||f - f_inf||^2)^{1/2}`.
pub fn autonomy_envelope(forcing: &ForcingProfile, tau: f64, c: f64, lambda: f64) -> f64 {
    c * lambda.exp() * forcing.approach_integral(tau).sqrt()
}

/// Wilson score interval at 95% for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub tau: f64,
    pub delta: f64,
    pub n_omega: usize,
    pub exceed: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `(1 - epsilon)`-quantile of `d(tau)` across seeds.
    pub quantile: f64,
    pub epsilon: f64,
    /// Seeds whose run failed and were left out.
    pub failures: usize,
}

/// Empirical `P(d(tau) >= delta)` across per-seed curves sharing one `tau` list.
pub fn probability_table(curves: &[Result<AutonomyCurve>], delta: f64, epsilon: f64) -> Result<Vec<ProbabilityRow>> {
    let ok: Vec<&AutonomyCurve> = curves.iter().filter_map(|c| c.as_ref().ok()).collect();
    let failures = curves.len() - ok.len();
    let first = ok.first().ok_or_else(|| Error::Domain("no completed autonomy curves".into()))?;
    let taus: Vec<f64> = first.rows.iter().map(|r| r.tau).collect();
    taus.iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut ds: Vec<f64> = ok.iter().map(|c| c.rows[i].d).collect();
            if ok.iter().any(|c| c.rows[i].tau != tau) {
                return Err(Error::Shape("autonomy curves disagree on the tau list".into()));
            }
            let n = ds.len();
            let exceed = ds.iter().filter(|&&d| d >= delta).count();
            let (lo, hi) = wilson_interval(exceed, n);
            ds.sort_by(f64::total_cmp);
            let q = quantile_sorted(&ds, 1.0 - epsilon);
            Ok(ProbabilityRow {
                tau,
                delta,
                n_omega: n,
                exceed,
                p_hat: exceed as f64 / n as f64,
                ci_low: lo,
                ci_high: hi,
                quantile: q,
                epsilon,
                failures,
            })
        })
        .collect()
}

/// Linear-interpolated quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    (1.0 - w) * sorted[lo] + w * sorted[hi]
}

/// Noise setup for a batch of seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub master_seed: u64,
    pub t_back: f64,
    pub t_fwd: f64,
    pub dt_path: f64,
}

impl PathSpec {
    pub fn omega(&self, index: usize, sigma: f64) -> Result<Omega> {
        Omega::sample(split_seed(self.master_seed, index as u64), self.t_back, self.t_fwd, self.dt_path, sigma)
    }
}

/// Per-seed autonomy curves over `n_omega` derived seeds, then the probability table.
#[allow(clippy::too_many_arguments)]
pub fn autonomy_in_probability(
    tau_list: &[f64],
    delta: f64,
    epsilon: f64,
    n_omega: usize,
    paths: &PathSpec,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
    t_pullback: f64,
    ensemble: &Ensemble,
) -> Result<(Vec<Result<AutonomyCurve>>, Vec<ProbabilityRow>)> {
    let curves: Vec<Result<AutonomyCurve>> = (0..n_omega)
        .into_par_iter()
        .map(|i| autonomy_curve(tau_list, &paths.omega(i, cfg.sigma)?, cfg, forcing, t_pullback, ensemble))
        .collect();
    let table = probability_table(&curves, delta, epsilon)?;
    Ok((curves, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactnessRow {
    pub t: f64,
    /// `sup_s max ||a||` over the sections `A(s - t, theta_{-t} omega)`.
    pub sup_norm: f64,
    /// `max` over the two ends of the `s`-grid only.
    pub endpoint_norm: f64,
    /// `(gamma, e^{-gamma t} sup_norm)`.
    pub weighted: Vec<(f64, f64)>,
}

/// Backward-uniform tempered decay of the sections, sampled on `s_grid` and horizons `t_list`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_compactness_probe(
    tau: f64,
    omega: &Omega,
    s_grid: &[f64],
    t_list: &[f64],
    t_pullback: f64,
    ensemble: &Ensemble,
    cfg: &SimConfig,
    forcing: &ForcingProfile,
) -> Result<Vec<CompactnessRow>> {
    let s: Vec<f64> = s_grid.iter().copied().filter(|&s| s <= tau).collect();
    if s.is_empty() {
        return Err(Error::Domain("the s-grid has no point at or below tau".into()));
    }
    let gammas = [0.25 * cfg.alpha, 0.5 * cfg.alpha, cfg.alpha];
    t_list
        .iter()
        .map(|&t| {
            // A(s - t, theta_{-t} omega): forcing at s - t, noise on path times ending at -t.
            let norms = s
                .iter()
                .map(|&si| Ok(run_section(si - t, -si, omega, t_pullback, ensemble, cfg, forcing)?.sup_norm()))
                .collect::<Result<Vec<f64>>>()?;
            let sup = norms.iter().copied().fold(0.0, f64::max);
            let ends = norms[0].max(*norms.last().unwrap());
            Ok(CompactnessRow {
                t,
                sup_norm: sup,
                endpoint_norm: ends,
                weighted: gammas.iter().map(|&g| (g, (-g * t).exp() * sup)).collect(),
            })
        })
        .collect()
}
