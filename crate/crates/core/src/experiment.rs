//! Configured single runs: the forced trajectory with its noise path, and the
//! baseline calibration of the inequality constants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Resolved, RunConfig};
use crate::constants::{FrozenConstants, CALIBRATION_SAFETY, C_STAR_PER_BETA};
use crate::diagnostics::calibrate_constants;
use crate::dynamics::NoiseCase;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::integrator::{Drive, EvolveOptions, Integrator, Retention, Trajectory};
use crate::ou::{ou_evaluate, split_seed, OUState, WienerPath};

pub struct SimulationOutput {
    pub path: WienerPath,
    pub ou: OUState,
    pub trajectory: Trajectory,
}

/// Noise path for a single run: seed index 0 of the master seed, covering
/// `[-t_back, horizon + dt_path]` on its own clock.
pub fn run_path(run: &RunConfig) -> Result<(WienerPath, OUState)> {
    let seed = split_seed(run.noise.master_seed, 0);
    let path = WienerPath::sample(seed, -run.diagnostics.t_back, run.simulate.horizon.max(0.0) + run.noise.dt_path, run.noise.dt_path)?;
    let ou = if run.noise.quiet { OUState::zero(&path, run.physics.sigma) } else { ou_evaluate(&path, run.physics.sigma)? };
    Ok((path, ou))
}

/// Initial state in the original variable.
pub fn initial_state(run: &RunConfig, res: &Resolved) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(run.simulate.initial_seed);
    if run.simulate.initial_norm > 0.0 {
        SpectralField::random_solenoidal(res.sim.grid, &mut rng, run.simulate.initial_norm)
    } else {
        SpectralField::zeros(res.sim.grid)
    }
}

/// Evolve `[tau, tau + horizon]` with the noise read as `y(theta_{t - tau} omega)`.
pub fn simulate_run(run: &RunConfig, res: &Resolved, ledger: bool) -> Result<SimulationOutput> {
    let (path, ou) = run_path(run)?;
    let s = &run.simulate;
    let steps = (s.horizon / run.dt).round() as usize;
    let retention = if s.snapshot_every == 0 {
        Retention::Endpoints
    } else if steps.is_multiple_of(s.snapshot_every) {
        Retention::Every(s.snapshot_every)
    } else {
        return Err(Error::Config(format!(
            "simulate.snapshot_every = {} does not divide the {steps} steps of the horizon",
            s.snapshot_every
        )));
    };
    let drive = Drive::new(ou.clone(), -s.tau, path.seed());
    let mut integ = Integrator::new(&res.sim, &res.forcing)?;
    let v0 = integ.rhs().from_original(&initial_state(run, res), drive.y(s.tau));
    let trajectory = integ.evolve(&v0, s.tau, s.horizon, &drive, EvolveOptions { retention, ledger, debug_checks: false })?;
    Ok(SimulationOutput { path, ou, trajectory })
}

/// The baseline used to fit the constants: half the time step and half the
/// forcing amplitude of `run`, over ten time units.
pub fn baseline(run: &RunConfig, case: NoiseCase) -> RunConfig {
    let mut b = run.clone();
    b.case = case;
    b.dt = run.dt / 2.0;
    b.noise.dt_path = run.noise.dt_path / 2.0;
    b.forcing.amplitude *= 0.5;
    b.simulate.horizon = 10.0;
    b.simulate.snapshot_every = 0;
    b
}

/// Fit and return the constants on both baselines.
pub fn calibrate(run: &RunConfig) -> Result<FrozenConstants> {
    let mut rows = Vec::new();
    let mut sim = None;
    for case in [NoiseCase::Multiplicative, NoiseCase::Additive] {
        let b = baseline(run, case);
        let res = b.resolve()?;
        rows.push(simulate_run(&b, &res, true)?.trajectory.ledger);
        if case == NoiseCase::Multiplicative {
            sim = Some(res.sim);
        }
    }
    let sim = sim.expect("multiplicative baseline ran");
    Ok(calibrate_constants(&rows[0], &rows[1], &sim, C_STAR_PER_BETA * sim.beta, CALIBRATION_SAFETY))
}
