//! `cbf`: simulations, diagnostics and attractor experiments driven by a JSON config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use cbf_core::attractor::{autonomy_curve, autonomy_curve_sections, probability_table, quantile_sorted, AttractorSection, AutonomyCurve, Ensemble, Omega};
use cbf_core::config::RunConfig;
use cbf_core::constants::{CALIBRATION_SAFETY, C_STAR_PER_BETA, FROZEN};
use cbf_core::diagnostics::{absorbing_integral, diagnostics_record, inequality_ledger, LedgerReport};
use cbf_core::dynamics::NoiseCase;
use cbf_core::experiment::{calibrate, run_path, simulate_run};
use cbf_core::integrator::{Drive, Integrator, LedgerRow};
use cbf_core::io;
use cbf_core::manifest::{sha256_hex, RunManifest, MANIFEST_NAME};
use cbf_core::ou::split_seed;
use cbf_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cbf", version, about = "Stochastic convective Brinkman-Forchheimer equations on a periodic box")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Every flag can also be set through the matching `CBF_*` environment variable.
#[derive(Args)]
struct Global {
    /// JSON run configuration; absent keys take their defaults.
    #[arg(long, global = true, env = "CBF_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "CBF_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Single worker thread; reruns produce byte-identical files.
    #[arg(long, global = true, env = "CBF_CERTIFY")]
    certify: bool,
    /// Noise case: multiplicative or additive.
    #[arg(long, global = true, env = "CBF_CASE")]
    case: Option<NoiseCase>,
    /// Absorption exponent.
    #[arg(long, global = true, env = "CBF_R")]
    r: Option<f64>,
    /// Forchheimer coefficient.
    #[arg(long, global = true, env = "CBF_BETA")]
    beta: Option<f64>,
    /// Viscosity.
    #[arg(long, global = true, env = "CBF_MU")]
    mu: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, env = "CBF_OUT_DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one forced noisy trajectory and record its energy ledger.
    Simulate,
    /// Recompute the inequality ledger and state diagnostics of a stored run.
    Diagnose {
        /// Directory written by `simulate`.
        run: PathBuf,
    },
    /// Autonomy curves per noise seed and the probability table.
    Attractor(AttractorArgs),
    /// Fit the inequality constants on the baseline runs.
    Calibrate,
    /// Print the JSON schema of the configuration file.
    Schema,
}

#[derive(Args)]
struct AttractorArgs {
    /// Comma-separated section times, e.g. `-2,-4,-8`.
    #[arg(long, env = "CBF_TAU_LIST", value_delimiter = ',', allow_hyphen_values = true)]
    tau_list: Option<Vec<f64>>,
    #[arg(long, env = "CBF_N_OMEGA")]
    n_omega: Option<usize>,
    /// Threshold for the exceedance probabilities.
    #[arg(long, env = "CBF_DELTA")]
    delta: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                _ => 1,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let threads = if g.certify { 1 } else { g.jobs };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    match &cli.cmd {
        Cmd::Schema => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::schema())?);
            Ok(())
        }
        Cmd::Simulate => cmd_simulate(&load_config(g)?, g),
        Cmd::Diagnose { run } => cmd_diagnose(run, g),
        Cmd::Attractor(a) => {
            let mut cfg = load_config(g)?;
            if let Some(t) = &a.tau_list {
                cfg.attractor.tau_list = t.clone();
            }
            if let Some(n) = a.n_omega {
                cfg.attractor.n_omega = n;
            }
            if a.delta.is_some() {
                cfg.attractor.delta = a.delta;
            }
            cmd_attractor(&cfg, g)
        }
        Cmd::Calibrate => cmd_calibrate(&load_config(g)?, g),
    }
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(c) = g.case {
        cfg.case = c;
    }
    if let Some(r) = g.r {
        cfg.physics.r = r;
    }
    if let Some(b) = g.beta {
        cfg.physics.beta = b;
    }
    if let Some(m) = g.mu {
        cfg.physics.mu = m;
    }
    Ok(cfg)
}

fn out_dir(g: &Global, default: &str) -> Result<PathBuf> {
    let d = g.out_dir.clone().unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&d)?;
    Ok(d)
}

fn manifest(command: &str, cfg: &RunConfig, g: &Global) -> Result<RunManifest> {
    let jobs = if g.certify { 1 } else { rayon::current_num_threads() };
    Ok(RunManifest::new(command, serde_json::to_value(cfg)?, cfg.hash(), cfg.noise.master_seed, g.certify, jobs))
}

fn finish(mut m: RunManifest, dir: &Path, files: &[PathBuf], summary: serde_json::Value) -> Result<()> {
    m.summary = summary;
    m.inventory(dir, files)?;
    m.write(dir)?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    io::write_file(path, (serde_json::to_string_pretty(v)? + "\n").as_bytes())
}

fn ledger_summary(r: &LedgerReport) -> serde_json::Value {
    json!({
        "max_ei1": r.max_ei1,
        "max_ei2": r.max_ei2,
        "max_ei1_defect": r.max_ei1_defect,
        "max_ei2_defect": r.max_ei2_defect,
        "ei1_breaches": r.ei1_breaches,
        "ei2_breaches": r.ei2_breaches,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotIndex {
    t: f64,
    file: String,
}

const SNAPSHOT_INDEX: &str = "snapshots.csv";
const LEDGER_RAW: &str = "ledger_raw.csv";

fn cmd_simulate(cfg: &RunConfig, g: &Global) -> Result<()> {
    let res = cfg.resolve()?;
    let dir = out_dir(g, "out/simulate")?;
    let m = manifest("simulate", cfg, g)?;
    let out = match simulate_run(cfg, &res, true) {
        Ok(o) => o,
        Err(Error::BlowUp { time, last_energy }) => {
            let p = dir.join("blowup.json");
            let dump = json!({
                "time": time,
                "last_energy": last_energy,
                "tau": cfg.simulate.tau,
                "horizon": cfg.simulate.horizon,
                "dt": cfg.dt,
                "case": cfg.case,
            });
            write_json(&p, &dump)?;
            finish(m, &dir, &[p], json!({ "blowup": dump }))?;
            return Err(Error::BlowUp { time, last_energy });
        }
        Err(e) => return Err(e),
    };
    let tr = &out.trajectory;
    let drive = Drive::new(out.ou.clone(), tr.omega.offset, tr.omega.seed);
    let integ = Integrator::new(&res.sim, &res.forcing)?;
    let mut files = Vec::new();
    let mut index = Vec::with_capacity(tr.states.len());
    for (i, (t, u)) in tr.times.iter().zip(&tr.states).enumerate() {
        let name = format!("snapshots/state_{i:05}.bin");
        let p = dir.join(&name);
        io::write_file(&p, &io::encode_snapshot(&integ.rhs().to_original(u, drive.y(*t))))?;
        files.push(p);
        index.push(SnapshotIndex { t: *t, file: name });
    }
    let report = inequality_ledger(&tr.ledger, &res.sim, &FROZEN);
    let residuals: Vec<f64> = report.steps.iter().map(|s| s.ei1).collect();
    let paths = [SNAPSHOT_INDEX, LEDGER_RAW, "ledger.csv", "path.csv"].map(|f| dir.join(f));
    io::write_rows(&paths[0], &index)?;
    io::write_rows(&paths[1], &tr.ledger)?;
    io::write_ledger_csv(&paths[2], &tr.ledger, &residuals)?;
    io::write_path_csv(&paths[3], &out.path, &out.ou)?;
    files.extend(paths);
    let summary = json!({
        "case": cfg.case,
        "admissibility": res.admissibility,
        "steps": tr.ledger.len().saturating_sub(1),
        "halvings": tr.halvings,
        "final_energy": tr.ledger.last().map(|r| r.energy),
        "ledger": ledger_summary(&report),
    });
    finish(m, &dir, &files, summary)?;
    println!("simulate: {} states, max EI1 residual {:.3e}, written to {}", index.len(), report.max_ei1, dir.display());
    Ok(())
}

fn cmd_diagnose(run_dir: &Path, g: &Global) -> Result<()> {
    let src = RunManifest::read(run_dir)?;
    src.verify(run_dir)?;
    if src.command != "simulate" {
        return Err(Error::Config(format!("{} holds a '{}' run, not a simulation", run_dir.display(), src.command)));
    }
    let cfg: RunConfig = serde_json::from_value(src.config.clone())
        .map_err(|e| Error::Integrity(format!("manifest config does not parse: {e}")))?;
    let res = cfg.resolve()?;
    let dir = match &g.out_dir {
        Some(d) => d.clone(),
        None => run_dir.join("diagnostics"),
    };
    fs::create_dir_all(&dir)?;

    let ledger: Vec<LedgerRow> = io::read_rows(&run_dir.join(LEDGER_RAW))?;
    let report = inequality_ledger(&ledger, &res.sim, &FROZEN);

    let (_, ou) = run_path(&cfg)?;
    let index: Vec<SnapshotIndex> = io::read_rows(&run_dir.join(SNAPSHOT_INDEX))?;
    let radii = cfg.radii();
    let modes = &cfg.diagnostics.modes;
    let tau = cfg.simulate.tau;
    let mut rows = Vec::with_capacity(index.len());
    for s in &index {
        let u = io::read_snapshot(&run_dir.join(&s.file))?;
        let shifted = ou.shifted_steps(((s.t - tau) / ou.dt()).round() as i64)?;
        let k = absorbing_integral(&shifted, s.t, &res.forcing, &res.sim, cfg.diagnostics.t_back)?.value;
        let rec = diagnostics_record(&u, s.t, &res.sim, k, &radii, modes)?;
        let mut row = vec![rec.t, rec.energy, rec.grad, rec.lr1, rec.k_value];
        row.extend(rec.tail_mass.iter().map(|p| p.1));
        row.extend(rec.flatten_remainder.iter().map(|p| p.1));
        rows.push(row);
    }
    let mut header: Vec<String> = ["t", "energy", "grad", "lr1", "k_value"].map(String::from).to_vec();
    header.extend((0..radii.len()).map(|j| format!("tail_mass_{j}")));
    header.extend(modes.iter().map(|i| format!("flatten_{i}")));

    let d_path = dir.join("diagnostics.csv");
    let r_path = dir.join("residuals.csv");
    io::write_table(&d_path, &header, &rows)?;
    io::write_rows(&r_path, &report.steps)?;
    let summary = json!({
        "source_manifest_sha256": sha256_hex(&fs::read(run_dir.join(MANIFEST_NAME))?),
        "source_config_hash": src.config_hash,
        "radii": radii,
        "modes": modes,
        "ledger": ledger_summary(&report),
    });
    finish(manifest("diagnose", &cfg, g)?, &dir, &[d_path, r_path], summary)?;
    println!("diagnose: {} states, {} ledger steps, written to {}", rows.len(), report.steps.len(), dir.display());
    Ok(())
}

fn omega(cfg: &RunConfig, index: usize) -> Result<Omega> {
    let seed = split_seed(cfg.noise.master_seed, index as u64);
    let (tb, dp, s) = (cfg.attractor.t_pullback, cfg.noise.dt_path, cfg.physics.sigma);
    if cfg.noise.quiet {
        Omega::quiet(seed, tb, dp, dp, s)
    } else {
        Omega::sample(seed, tb, dp, dp, s)
    }
}

fn write_section(dir: &Path, name: &str, sec: &AttractorSection, limit: bool, files: &mut Vec<PathBuf>) -> Result<()> {
    let mut members = Vec::with_capacity(sec.points.len());
    for (j, p) in sec.points.iter().enumerate() {
        let rel = format!("{name}/member_{j:03}.bin");
        let path = dir.join(&rel);
        io::write_file(&path, &io::encode_snapshot(p))?;
        files.push(path);
        members.push(rel);
    }
    let meta = json!({
        "tau": sec.tau,
        "limit": limit,
        "omega_seed": sec.omega_seed,
        "pullback_horizon": sec.pullback_horizon,
        "ensemble": sec.ensemble,
        "halvings": sec.halvings,
        "diameter": sec.diameter(),
        "sup_norm": sec.sup_norm(),
        "members": members,
    });
    let p = dir.join(format!("{name}/section.json"));
    write_json(&p, &meta)?;
    files.push(p);
    Ok(())
}

fn cmd_attractor(cfg: &RunConfig, g: &Global) -> Result<()> {
    let res = cfg.resolve()?;
    let at = &cfg.attractor;
    if at.tau_list.is_empty() || at.n_omega == 0 {
        return Err(Error::Config("attractor needs a nonempty tau list and n_omega >= 1".into()));
    }
    if !(at.epsilon > 0.0 && at.epsilon < 1.0) {
        return Err(Error::Config(format!("attractor.epsilon must lie in (0, 1), got {}", at.epsilon)));
    }
    let ensemble = Ensemble::new(at.rho0, at.members, at.ensemble_seed)?;
    let dir = out_dir(g, "out/attractor")?;

    type Run = Result<(AutonomyCurve, Option<Vec<AttractorSection>>)>;
    let runs: Vec<Run> = (0..at.n_omega)
        .into_par_iter()
        .map(|i| {
            let om = omega(cfg, i)?;
            if i == 0 {
                let (c, s) = autonomy_curve_sections(&at.tau_list, &om, &res.sim, &res.forcing, at.t_pullback, &ensemble)?;
                Ok((c, Some(s)))
            } else {
                Ok((autonomy_curve(&at.tau_list, &om, &res.sim, &res.forcing, at.t_pullback, &ensemble)?, None))
            }
        })
        .collect();

    let mut files = Vec::new();
    let mut curves = Vec::with_capacity(runs.len());
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok((curve, sections)) => {
                let p = dir.join(format!("curves/seed_{i:03}.csv"));
                fs::create_dir_all(p.parent().unwrap())?;
                io::write_rows(&p, &curve.rows)?;
                files.push(p);
                if let Some(secs) = sections {
                    let n = secs.len();
                    for (k, sec) in secs.iter().enumerate() {
                        let name = if k + 1 == n { "sections/limit".to_string() } else { format!("sections/tau_{k}") };
                        write_section(&dir, &name, sec, k + 1 == n, &mut files)?;
                    }
                }
                curves.push(Ok(curve));
            }
            Err(e @ Error::BlowUp { .. }) => {
                eprintln!("seed {i}: {e}");
                curves.push(Err(e));
            }
            Err(e) => return Err(e),
        }
    }

    let delta = match at.delta {
        Some(d) => d,
        None => {
            let mut d0: Vec<f64> = curves.iter().filter_map(|c| c.as_ref().ok()).map(|c| c.rows[0].d).collect();
            d0.sort_by(f64::total_cmp);
            quantile_sorted(&d0, 0.5)
        }
    };
    let table = probability_table(&curves, delta, at.epsilon)?;
    let p = dir.join("probability.csv");
    io::write_rows(&p, &table)?;
    files.push(p);

    let medians: Vec<f64> = (0..at.tau_list.len())
        .map(|k| {
            let mut d: Vec<f64> = curves.iter().filter_map(|c| c.as_ref().ok()).map(|c| c.rows[k].d).collect();
            d.sort_by(f64::total_cmp);
            quantile_sorted(&d, 0.5)
        })
        .collect();
    let summary = json!({
        "tau_list": at.tau_list,
        "delta": delta,
        "n_omega": at.n_omega,
        "failures": curves.iter().filter(|c| c.is_err()).count(),
        "median_d": medians,
        "p_hat": table.iter().map(|r| r.p_hat).collect::<Vec<_>>(),
    });
    finish(manifest("attractor", cfg, g)?, &dir, &files, summary)?;
    for r in &table {
        println!("tau {:>6}: p_hat {:.3} [{:.3}, {:.3}], {:.2}-quantile of d {:.4e}", r.tau, r.p_hat, r.ci_low, r.ci_high, 1.0 - r.epsilon, r.quantile);
    }
    Ok(())
}

fn cmd_calibrate(cfg: &RunConfig, g: &Global) -> Result<()> {
    cfg.resolve()?;
    if cfg.case == NoiseCase::Additive {
        eprintln!("calibrate: fits both noise cases; --case is ignored");
    }
    let fitted = calibrate(cfg)?;
    let dir = out_dir(g, "out/calibrate")?;
    let p = dir.join("calibration.json");
    write_json(&p, &json!({ "fitted": fitted, "frozen": FROZEN, "safety": CALIBRATION_SAFETY, "c_star_per_beta": C_STAR_PER_BETA }))?;
    finish(manifest("calibrate", cfg, g)?, &dir, std::slice::from_ref(&p), json!({ "fitted": fitted }))?;
    println!("{}", serde_json::to_string_pretty(&fitted)?);
    Ok(())
}
