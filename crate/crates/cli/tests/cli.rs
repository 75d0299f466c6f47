//! End-to-end checks of the command-line front end.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlasov-lab"))
}

const TINY: &str = "grid.nx = 16\ngrid.nv = 16\ngrid.field_points = 24\ntime.t_end = 0.5\ntime.first = 0.25\ntime.count = 2\ndiagnostics.energy_order = 1\ndiagnostics.commuted_order = 0\ndiagnostics.budget_order = 0\n";

#[test]
fn run_writes_a_verifiable_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.cfg");
    std::fs::write(&cfg, TINY).unwrap();
    let out = tmp.path().join("out");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--output").arg(&out).status().unwrap();
    assert!(status.success());
    assert!(out.join("series/energy_1.csv").exists());
    let verify = bin().arg("verify-manifest").arg(&out).output().unwrap();
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stdout));

    let fit = bin().arg("fit-decay").arg(out.join("series/sup_rho.csv")).args(["--window", "0,0.5"]).output().unwrap();
    // Three observations are below the minimum fit size: rejected as an invalid argument.
    assert_eq!(fit.status.code(), Some(3), "{}", String::from_utf8_lossy(&fit.stderr));
}

#[test]
fn output_root_is_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("tiny.cfg");
    std::fs::write(&cfg, format!("{TINY}output = nested/run\n")).unwrap();
    let status = bin().args(["run", "--config"]).arg(&cfg).env("VLASOV_LAB_OUTPUT_ROOT", tmp.path()).status().unwrap();
    assert!(status.success());
    assert!(tmp.path().join("nested/run/manifest.json").exists());
}

#[test]
fn invalid_config_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "system = vy\nn = banana\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = bin().args(["show-config", "--set", "system=vp"]).output().unwrap();
    assert!(out.status.success());
    let gated = bin().args(["run", "--set", "system=vp"]).output().unwrap();
    assert_eq!(gated.status.code(), Some(3));
}

#[test]
fn budget_violation_exits_with_4() {
    let out = bin().args(["run", "--set", "grid.nx=400", "--set", "grid.nv=400"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bessel_table_and_fit_decay() {
    let out = bin().args(["bessel-table", "--nu", "0.5", "--points", "5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("nu,r,k_nu,bound,ratio"));

    let tmp = tempfile::tempdir().unwrap();
    let series = tmp.path().join("s.csv");
    let mut csv = String::from("t,value\n");
    for k in 0..20 {
        let t = k as f64;
        csv.push_str(&format!("{t},{}\n", (1.0 + t).powf(-1.5)));
    }
    std::fs::write(&series, csv).unwrap();
    let out = bin().arg("fit-decay").arg(&series).args(["--window", "1,19"]).output().unwrap();
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["exponent"].as_f64().unwrap() + 1.5).abs() < 1e-9);
}

#[test]
fn lemma_suite_names_are_checked() {
    let out = bin().args(["verify-lemmas", "--suite", "nonsense"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["verify-lemmas", "--suite", "bessel", "--output"]).arg(tmp.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(tmp.path().join("bessel.csv").exists());
}
