use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const KASNER: &str = r#"
seed = 42

[metric]
model = "kasner"
p = [0.6666666666666666, 0.6666666666666666, -0.3333333333333333]

[span]
t0 = 1.0
t1 = 10.0
outputs = 10

[grid]
n_k = 8
k_min = 0.05
k_max = 1.0
n_delta = 4
n_xi = 4

[mode]
k = 1.0
delta = 1.0471975511965976
xi = 0.6283185307179586
helicity = 1
method = "suv"
"#;

const ISOTROPIC: &str = r#"
[metric]
model = "isotropic_power_law"
r0 = 1.0
p = 1.0

[span]
t0 = 1.0
t1 = 5.0
outputs = 5

[grid]
n_k = 6
k_min = 0.1
k_max = 2.0
n_delta = 4
n_xi = 4

[mode]
k = 1.0
delta = 0.7
xi = 0.3
helicity = 1
method = "suv"
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn amx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amx")).args(args).output().unwrap()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let body = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    (header, body)
}

fn run_ok(args: &[&str]) -> String {
    let out = amx(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn isotropic_mode_stays_in_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "iso.toml", ISOTROPIC);
    let (header, body) = rows(&run_ok(&["mode", "--config", cfg.to_str().unwrap()]));
    assert_eq!(header, ["t", "S", "U", "V", "invariant_residual"]);
    assert_eq!(body.len(), 5);
    assert!(body.iter().all(|r| r[1] == 0.0 && r[2] == 0.0 && r[3] == 0.0));
}

#[test]
fn kasner_mode_rows_satisfy_connection_formula() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", KASNER);
    for method in ["suv", "bogoliubov"] {
        let (_, body) = rows(&run_ok(&["mode", "--config", cfg.to_str().unwrap(), "--method", method]));
        for r in &body {
            let (s, u, v) = (r[1], r[2], r[3]);
            assert!((u * u + v * v - 4.0 * s * (s + 1.0)).abs() <= 1e-9, "{method}: {r:?}");
        }
        assert!(body.last().unwrap()[1] > 0.0);
    }
    let (header, body) = rows(&run_ok(&["mode", "--config", cfg.to_str().unwrap(), "--method", "second_order"]));
    assert_eq!(header, ["t", "re_y", "im_y", "re_ydot", "im_ydot", "invariant_residual"]);
    assert!(body.iter().all(|r| r[5].abs() <= 1e-8));
}

#[test]
fn invalid_method_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", KASNER);
    let out = amx(&["mode", "--config", cfg.to_str().unwrap(), "--method", "leapfrog"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["suv", "second_order", "bogoliubov"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn isotropic_emt_is_zero_and_conserved() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "iso.toml", ISOTROPIC);
    let (header, body) = rows(&run_ok(&["emt", "--config", cfg.to_str().unwrap()]));
    assert_eq!(
        &header[..10],
        ["t", "T00", "T11", "T22", "T33", "T12", "T13", "T23", "conservation_residual", "conservation_scale"]
    );
    assert!(body.iter().all(|r| r[1..10].iter().all(|x| *x == 0.0)));
}

#[test]
fn empty_k_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &KASNER.replace("n_k = 8", "n_k = 0"));
    assert_eq!(amx(&["emt", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = write(dir.path(), "bad2.toml", &KASNER.replace("k_max = 1.0", "k_max = 0.01"));
    assert_eq!(amx(&["emt", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn memory_budget_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.toml", &format!("{KASNER}\n[emt]\nmemory_budget_mb = 0.001\n"));
    let out = amx(&["emt", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn spectrum_rows_are_traceless() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", KASNER);
    let (header, body) = rows(&run_ok(&["spectrum", "--config", cfg.to_str().unwrap()]));
    assert_eq!(header.last().unwrap(), "trace");
    assert_eq!(body.len(), 8 * 4 * 4);
    for r in &body {
        assert!(r.iter().all(|x| x.is_finite()));
        let scale = r[3..7].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(r[10].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE), "{r:?}");
    }
    let iso = write(dir.path(), "iso.toml", ISOTROPIC);
    let (_, body) = rows(&run_ok(&["spectrum", "--config", iso.to_str().unwrap(), "--time", "3.0"]));
    assert!(body.iter().all(|r| r[3..].iter().all(|x| *x == 0.0)));
}

#[test]
fn spectrum_time_outside_span_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", KASNER);
    let out = amx(&["spectrum", "--config", cfg.to_str().unwrap(), "--time", "11.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_check_tolerance_fails_validation_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let text = KASNER.replace("seed = 42", "seed = 42\n[tolerances]\n[tolerances.checks]\n\"modes.bogoliubov_vs_suv\" = 0.0\n");
    let cfg = write(dir.path(), "z.toml", &text);
    let out = amx(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("modes.bogoliubov_vs_suv"));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let failing: Vec<&str> = report
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["pass"] == false)
        .map(|r| r["check"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["modes.bogoliubov_vs_suv"]);
}

#[test]
fn validate_report_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", KASNER);
    let a = run_ok(&["validate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--workers", "1"]);
    let b = run_ok(&["validate", "--config", cfg.to_str().unwrap(), "--seed", "42", "--workers", "3"]);
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_str(&a).unwrap();
    for r in report.as_array().unwrap() {
        let keys: Vec<&String> = r.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["check", "max_abs", "max_rel", "pass", "samples"]);
    }
    let c = run_ok(&["validate", "--config", cfg.to_str().unwrap(), "--seed", "7"]);
    assert_ne!(a, c);
}

#[test]
fn json_config_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "iso.json",
        r#"{"metric": {"model": "isotropic_power_law", "r0": 1.0, "p": 0.5},
            "span": {"t0": 1.0, "t1": 2.0, "outputs": 3}}"#,
    );
    let out = dir.path().join("mode.csv");
    let stdout = run_ok(&["mode", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(stdout.is_empty());
    assert!(fs::read_to_string(&out).unwrap().starts_with("t,S,U,V,invariant_residual\n"));
}

#[test]
fn tabulated_metric_from_relative_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = String::from("t,a1,a2,a3\n");
    for i in 0..20 {
        let t = 0.5 + 0.5 * i as f64;
        table.push_str(&format!("{t},{},{},{}\n", t.powf(2.0 / 3.0), t.powf(2.0 / 3.0), t.powf(-1.0 / 3.0)));
    }
    write(dir.path(), "kasner.csv", &table);
    let cfg = write(
        dir.path(),
        "tab.toml",
        &KASNER.replace(
            "model = \"kasner\"\np = [0.6666666666666666, 0.6666666666666666, -0.3333333333333333]",
            "model = \"tabulated\"\npath = \"kasner.csv\"",
        ),
    );
    let (_, body) = rows(&run_ok(&["mode", "--config", cfg.to_str().unwrap()]));
    assert!(body.last().unwrap()[1] > 0.0);
}

#[test]
fn missing_config_is_exit_two() {
    assert_eq!(amx(&["validate", "--config", "/nonexistent/amx.toml"]).status.code(), Some(2));
}
