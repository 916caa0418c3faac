use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ion-reservoir"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_with(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut c = bin();
    c.arg(sub)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra);
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

fn summary(csv: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap()
}

fn rows(csv: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn column(csv: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(csv).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|x| x.unwrap()[idx].to_owned()).collect()
}

#[test]
fn missing_config_file_exits_2() {
    let out = run(&["synth", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_without_config_exits_2() {
    let out = run(&["synth"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dim = 20\nn_stagez = 3\n");
    let out = run_with("synth", &cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_stagez"));
}

#[test]
fn bad_channel_parameter_names_the_channel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dim = 20\n[[channels]]\nkind = \"cooling\"\n[[channels]]\nkind = \"squeezed\"\nr = -1.0\n",
    );
    let out = run_with("synth", &cfg, &dir.path().join("r.csv"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("channels[1]"));
}

#[test]
fn dimension_out_of_range_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(
        "synth",
        &config("thermal_synthesis.toml"),
        &dir.path().join("r.csv"),
        &["--dim", "4"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_stages_gives_single_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dim = 20\nn_stages = 0\n[[channels]]\nkind = \"cooling\"\n[initial_state]\nkind = \"number\"\nn = 2\n",
    );
    let csv = dir.path().join("r.csv");
    let out = run_with("synth", &cfg, &csv, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][0], "0");
    let f0: f64 = column(&csv, "fidelity_0")[0].parse().unwrap();
    assert!((f0 - 1.0).abs() < 1e-12);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = run_with(
            "synth",
            &config("squeezed_coherent.toml"),
            p,
            &["--dim", "20"],
        );
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let strip = |p: &Path| {
        let mut v = summary(p);
        v.as_object_mut().unwrap().remove("output");
        v
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn thermal_synthesis_reaches_target() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let out = run_with("synth", &config("thermal_synthesis.toml"), &csv, &[]);
    assert!(out.status.success());
    assert_eq!(rows(&csv).len(), 61);
    let s = summary(&csv);
    let n95 = s["n_95"].as_u64().unwrap();
    assert!((12..=35).contains(&n95), "n_95 = {n95}");
    assert!(s["passed"].as_bool().unwrap());
    let fid = column(&csv, "fidelity_inf");
    let last: f64 = fid.last().unwrap().parse().unwrap();
    assert!(last > 0.95);
}

#[test]
fn steady_cooling_is_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let out = run_with("steady", &config("steady_cooling.toml"), &csv, &[]);
    assert!(out.status.success());
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    assert_eq!(&r[0][0], "inf");
    let f: f64 = column(&csv, "fidelity_inf")[0].parse().unwrap();
    assert!((1.0 - f).abs() <= 1e-9);
}

#[test]
fn protection_never_does_worse() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p.csv");
    let out = run_with("protect", &config("protect.toml"), &csv, &["--dim", "24"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] protection_never_worse"));
    let prot = column(&csv, "fidelity_0");
    let bare = column(&dir.path().join("p_unprotected.csv"), "fidelity_0");
    assert_eq!(prot.len(), bare.len());
    for (p, b) in prot.iter().zip(&bare) {
        let (p, b): (f64, f64) = (p.parse().unwrap(), b.parse().unwrap());
        assert!(p >= b - 1e-12);
    }
}

#[test]
fn otto_sweep_marks_surpassing_points() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("o.csv");
    let out = run_with("otto", &config("otto_sweep.toml"), &csv, &[]);
    assert!(out.status.success());
    let xs = column(&csv, "x");
    let es = column(&csv, "efficiency");
    let i = xs
        .iter()
        .position(|x| (x.parse::<f64>().unwrap() - 0.4).abs() < 1e-12)
        .unwrap();
    let e: f64 = es[i].parse().unwrap();
    assert!((e - 0.5).abs() < 1e-9);
    let s = summary(&csv);
    assert!((s["efficiency_otto"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!(s["surpassing_points"].as_u64().unwrap() > 0);
}

#[test]
fn otto_numeric_agrees_with_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("o.csv");
    let out = run_with("otto", &config("otto_sweep.toml"), &csv, &["--numeric"]);
    assert!(out.status.success());
    for d in column(&csv, "max_difference") {
        assert!(d.parse::<f64>().unwrap() <= 1e-6);
    }
}

#[test]
fn reset_rate_and_spectator_level() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = run_with("reset", &config("reset.toml"), &csv, &[]);
    assert!(out.status.success());
    let s = summary(&csv);
    assert!(s["relative_error_step1"].as_f64().unwrap() <= 0.05);
    assert!(s["rho22_drift_step1"].as_f64().unwrap() <= 1e-9);
    assert!(s["final_ground_population"].as_f64().unwrap() >= 0.99);
}

#[test]
fn validate_passes() {
    let out = run(&["validate"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("injected_large_increment_detected"));
    assert!(!stdout.contains("[FAIL]"));
}
