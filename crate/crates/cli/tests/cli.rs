use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sfprobe_cli::curve::{same_bits, CurveFile};
use tempfile::TempDir;

fn sfprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = sfprobe(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eos_default_scan() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    run_ok(&["eos", "--out", s(&out)]);
    let c = CurveFile::read(&out.join("eos.csv")).unwrap();
    assert_eq!(c.rows.len(), 41);
    let inv = c.values("inv_kfa").unwrap();
    assert_eq!(inv[0], -2.0);
    assert_eq!(inv[40], 2.0);
    for (x, bec) in inv.iter().zip(c.values("mu_bec_asymptote").unwrap()) {
        assert_eq!(bec, -x * x);
    }
    assert_eq!(c.metadata["delta_increasing"], "true");
    assert_eq!(c.metadata["mu_decreasing"], "true");
    assert_eq!(c.metadata["units"], "k_F = E_F = 1, m = 1/2, hbar = 1");
    assert!(c.column_index("delta_hz").is_none());
    assert!(out.join("eos.meta.json").exists());
}

#[test]
fn outputs_are_byte_identical_and_reread_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", "scan = [-1.0, 0.0, 0.5]\n[lab]\ndensity_cm3 = 2e12\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["eos", "--config", s(&cfg), "--out", s(&a), "--threads", "1"]);
    run_ok(&["eos", "--config", s(&cfg), "--out", s(&b), "--threads", "3"]);
    for f in ["eos.csv", "eos.meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(a.join("eos.csv")).unwrap();
    let c = CurveFile::read(&a.join("eos.csv")).unwrap();
    assert_eq!(c.to_csv(), text);
    assert!(c.column_index("c_mm_s").is_some());

    let j = dir.path().join("j");
    run_ok(&["eos", "--config", s(&cfg), "--out", s(&j), "--format", "json"]);
    let cj = CurveFile::read(&j.join("eos.json")).unwrap();
    assert!(same_bits(&c, &cj));
}

#[test]
fn json_config_is_accepted() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.json", r#"{"scan": [0.0], "numerics": {"epsilon": 0.02}}"#);
    let out = dir.path().join("o");
    run_ok(&["eos", "--config", s(&cfg), "--out", s(&out)]);
    let c = CurveFile::read(&out.join("eos.csv")).unwrap();
    assert_eq!(c.rows.len(), 1);
}

#[test]
fn dispersion_reports_merging() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "c.toml",
        "scan = [-0.5, 1.0]\n[dispersion]\nq = { start = 0.25, stop = 3.0, step = 0.25 }\n",
    );
    let out = dir.path().join("o");
    run_ok(&["dispersion", "--config", s(&cfg), "--out", s(&out)]);
    let bcs = CurveFile::read(&out.join("dispersion_inv-0.500.csv")).unwrap();
    let bec = CurveFile::read(&out.join("dispersion_inv+1.000.csv")).unwrap();
    assert!(bcs.values("merged").unwrap().iter().any(|&m| m == 1.0));
    assert!(bcs.values("merged_q").unwrap().iter().any(|q| q.is_finite()));
    assert!(bec.values("merged").unwrap().iter().all(|&m| m == 0.0));
    assert_eq!(bec.metadata["merged_q_range"], "none");
    // The long-wavelength overlay approaches the computed weight at small q.
    let w = bec.values("weight").unwrap();
    let w0 = bec.values("weight_smallq").unwrap();
    assert!((w[0] / w0[0] - 1.0).abs() < 0.05);
}

#[test]
fn gamma_scan_sets_and_thread_independence() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "c.toml",
        "scan_preset = \"unitary-bec\"\n[probe]\nomega_a = { start = 0.5, stop = 1.5, step = 0.5 }\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["gamma", "--config", s(&cfg), "--out", s(&a), "--threads", "1"]);
    run_ok(&["gamma", "--config", s(&cfg), "--out", s(&b), "--threads", "2"]);
    for tag in ["+0.020", "+0.080", "+0.140", "+0.200"] {
        let f = format!("gamma_inv{tag}.csv");
        let bytes = fs::read(a.join(&f)).unwrap();
        assert_eq!(bytes, fs::read(b.join(&f)).unwrap());
        let c = CurveFile::read(&a.join(&f)).unwrap();
        assert_eq!(c.metadata["mass_ratio"], (40.0f64 / 6.0).to_string());
        assert_eq!(c.metadata["kappa"], "0.18");
        assert_eq!(c.metadata["markovian"], "true");
        let gamma = c.values("gamma").unwrap();
        assert!(gamma.iter().all(|&g| g > 0.0));
        let above = c.values("above_gap").unwrap();
        assert_eq!(above, vec![0.0, 1.0, 1.0]);
        // Below the gap the collective route tracks the full rate; near
        // unitarity the broadened route keeps an O(ε) continuum tail.
        let coll = c.values("gamma_collective").unwrap()[0];
        assert!((coll / gamma[0] - 1.0).abs() < 0.1);
    }
}

#[test]
fn other_scan_set_is_available() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", "scan_preset = \"bcs-unitary\"\n");
    let out = dir.path().join("o");
    run_ok(&["eos", "--config", s(&cfg), "--out", s(&out)]);
    let c = CurveFile::read(&out.join("eos.csv")).unwrap();
    assert_eq!(c.values("inv_kfa").unwrap(), vec![-0.31, -0.24, -0.11, 0.0]);
}

#[test]
fn dsf_grid_is_non_negative() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "c.toml",
        "[dsf]\nq = [0.5, 1.5]\nnu = { start = 0.1, stop = 3.0, step = 0.1 }\n",
    );
    let out = dir.path().join("o");
    run_ok(&["dsf-grid", "--config", s(&cfg), "--out", s(&out)]);
    let c = CurveFile::read(&out.join("dsf_inv+0.000.csv")).unwrap();
    assert_eq!(c.rows.len(), 60);
    assert!(c.values("s").unwrap().iter().all(|&v| v >= 0.0));
}

#[test]
fn validate_passes_on_defaults_with_epsilon_study() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    run_ok(&["validate", "--out", s(&out)]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let eps: Vec<f64> = report["epsilon_study"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["epsilon"].as_f64().unwrap())
        .collect();
    assert_eq!(eps, vec![0.04, 0.02, 0.01, 0.005]);
}

#[test]
fn coarse_quadrature_fails_validation_with_named_check() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "c.toml", "[numerics]\nchi_rel_tol = 0.3\nmax_panels = 4\n");
    let out = dir.path().join("o");
    let r = sfprobe(&["validate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("validate.json")).unwrap()).unwrap();
    let failed: Vec<&serde_json::Value> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .collect();
    assert!(failed.iter().any(|c| c["name"] == "i11_identity" && c["measured"].as_f64().unwrap() > 1e-6));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    for (name, text) in [
        ("unsorted.toml", "scan = [0.5, 0.0]"),
        ("unknown.toml", "scna = [0.0]"),
        ("broken.json", "{"),
        ("negative.toml", "[probe]\nkappa = -1.0"),
    ] {
        let cfg = config(&dir, name, text);
        let r = sfprobe(&["eos", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(r.status.code(), Some(2), "{name}");
    }
    assert_eq!(sfprobe(&["eos", "--threads", "0", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(sfprobe(&["eos", "--format", "xml"]).status.code(), Some(2));
    assert_eq!(sfprobe(&["eos", "--config", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_3_and_names_the_point() {
    let dir = TempDir::new().unwrap();
    // Far on the BCS side the gap is exponentially small and the integrals stall.
    let cfg = config(&dir, "c.toml", "scan = [-30.0]");
    let r = sfprobe(&["eos", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&r.stderr).contains("1/k_F a = -30"));
}
