use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cbf_core::manifest::{orphan_scan, RunManifest};

fn cbf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tree_digest(root: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, cbf_core::manifest::sha256_hex(&fs::read(&p).unwrap())));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn inadmissible_critical_regime_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = cbf(&["--r", "3", "--beta", "0.25", "--mu", "1", "--out-dir", out.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("2*beta*mu >= 1"), "{}", stderr(&o));
    let o = cbf(&["--r", "2.5", "simulate", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), r#"{"physics": {"betta": 2.0}}"#);
    let o = cbf(&["--config", &c, "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("betta"), "{}", stderr(&o));
}

#[test]
fn zero_run_is_fast_and_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), r#"{"forcing": {"amplitude": 0.0}, "simulate": {"initial_norm": 0.0}}"#);
    let run = dir.path().join("run");
    let start = std::time::Instant::now();
    let o = cbf(&["--config", &c, "--out-dir", run.to_str().unwrap(), "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(start.elapsed().as_secs_f64() < 5.0);
    let o = cbf(&["diagnose", run.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(run.join("diagnostics/residuals.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,ei1,ei1_defect,ei2,ei2_defect"));
    let mut n = 0;
    for l in lines {
        let vals: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(vals[1..].iter().all(|&v| v == 0.0), "{l}");
        n += 1;
    }
    assert_eq!(n, 200);
}

#[test]
fn certify_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = cbf(&["--certify", "--out-dir", d.to_str().unwrap(), "simulate"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(tree_digest(&a), tree_digest(&b));
}

#[test]
fn diagnose_matches_inline_ledger_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(cbf(&["--case", "additive", "--out-dir", run.to_str().unwrap(), "simulate"]).status.success());
    let d1 = dir.path().join("d1");
    let d2 = dir.path().join("d2");
    for d in [&d1, &d2] {
        let o = cbf(&["--out-dir", d.to_str().unwrap(), "diagnose", run.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["diagnostics.csv", "residuals.csv"] {
        assert_eq!(fs::read(d1.join(f)).unwrap(), fs::read(d2.join(f)).unwrap(), "{f}");
    }
    let sim = RunManifest::read(&run).unwrap();
    let diag = RunManifest::read(&d1).unwrap();
    assert_eq!(sim.summary["ledger"], diag.summary["ledger"]);
    assert_eq!(sim.summary["ledger"]["ei1_breaches"], 0);

    let ledger = fs::read_to_string(run.join("ledger.csv")).unwrap();
    let residuals = fs::read_to_string(d1.join("residuals.csv")).unwrap();
    for (l, r) in ledger.lines().skip(1).zip(residuals.lines().skip(1)) {
        let inline: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        let recomputed: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(inline, recomputed);
    }
}

#[test]
fn corrupt_snapshot_is_an_integrity_failure() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(cbf(&["--out-dir", run.to_str().unwrap(), "simulate"]).status.success());
    let snap = run.join("snapshots/state_00002.bin");
    let mut bytes = fs::read(&snap).unwrap();
    bytes[64] ^= 0x10;
    fs::write(&snap, bytes).unwrap();
    let o = cbf(&["diagnose", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("integrity"), "{}", stderr(&o));
    fs::remove_file(&snap).unwrap();
    assert_eq!(cbf(&["diagnose", run.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn every_output_belongs_to_exactly_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(cbf(&["--out-dir", run.to_str().unwrap(), "simulate"]).status.success());
    assert!(cbf(&["diagnose", run.to_str().unwrap()]).status.success());
    let (orphans, doubles) = orphan_scan(&run).unwrap();
    assert!(orphans.is_empty(), "{orphans:?}");
    assert!(doubles.is_empty(), "{doubles:?}");
    fs::write(run.join("stray.txt"), "x").unwrap();
    assert_eq!(orphan_scan(&run).unwrap().0, vec!["stray.txt".to_string()]);
}

#[test]
fn blow_up_writes_a_dump_and_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), r#"{"forcing": {"amplitude": 1e300}}"#);
    let run = dir.path().join("run");
    let o = cbf(&["--config", &c, "--out-dir", run.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(1));
    let dump: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("blowup.json")).unwrap()).unwrap();
    assert!(dump["time"].as_f64().unwrap() <= 0.0);
    assert!(orphan_scan(&run).unwrap().0.is_empty());
}

#[test]
fn attractor_curves_have_the_published_columns() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), r#"{"attractor": {"members": 3, "t_pullback": 3.0, "rho0": 5.0}}"#);
    let out = dir.path().join("att");
    let o = cbf(&["--config", &c, "--out-dir", out.to_str().unwrap(), "attractor", "--tau-list=-1,-2", "--n-omega", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..2 {
        let text = fs::read_to_string(out.join(format!("curves/seed_{i:03}.csv"))).unwrap();
        assert_eq!(text.lines().next(), Some("tau,d,n_points,t_pullback,floor_estimate"));
        assert_eq!(text.lines().count(), 3);
    }
    let p = fs::read_to_string(out.join("probability.csv")).unwrap();
    assert!(p.starts_with("tau,delta,n_omega,exceed,p_hat,ci_low,ci_high,quantile,epsilon,failures\n"));
    let (orphans, doubles) = orphan_scan(&out).unwrap();
    assert!(orphans.is_empty() && doubles.is_empty(), "{orphans:?} {doubles:?}");
    RunManifest::read(&out).unwrap().verify(&out).unwrap();
}

#[test]
fn autonomous_forcing_gives_a_flat_zero_curve() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(
        dir.path(),
        r#"{"forcing": {"mode": {"kind": "autonomous"}}, "attractor": {"members": 2, "t_pullback": 2.0, "rho0": 3.0}}"#,
    );
    let out = dir.path().join("att");
    let o = cbf(&["--config", &c, "--out-dir", out.to_str().unwrap(), "attractor", "--tau-list=-1,-3", "--n-omega", "1", "--delta", "1e-6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("curves/seed_000.csv")).unwrap();
    for l in text.lines().skip(1) {
        let d: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!(d < 1e-10, "{l}");
    }
}

#[test]
fn published_schema_is_current() {
    let o = cbf(&["schema"]);
    assert!(o.status.success());
    let published = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/config.schema.json")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), published);
}

#[test]
fn env_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_cbf"))
        .env("CBF_BETA", "0.1")
        .env("CBF_OUT_DIR", &out)
        .arg("simulate")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
