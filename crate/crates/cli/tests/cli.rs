//! End-to-end runs of the binary: exit-code contract, report determinism,
//! archive round trips, and the field catalog behaving as documented.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ymlab"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn run_cmd(dir: &Path, config: &str, cmd: &[&str], extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, config);
    let out = dir.join("out");
    let mut args: Vec<&str> = cmd.to_vec();
    let cfg_s = cfg.to_str().unwrap().to_string();
    let out_s = out.to_str().unwrap().to_string();
    args.extend(["--config", &cfg_s, "--out", &out_s]);
    args.extend(extra);
    (bin().args(&args).output().expect("binary runs"), out)
}

const FLAT2: &str = r#"{
    "grid": {"n": 2, "m": 9, "half_width": 3.0},
    "field": {"kind": "flat"}
}"#;

#[test]
fn schema_prints_and_bad_configs_exit_one_with_paths() {
    let out = run(&["schema"]);
    assert!(out.status.success());
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(schema["title"], "RunConfig");
    assert!(schema["properties"]["grid"].is_object());

    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_cmd(
        dir.path(),
        r#"{"grid": {"n": 2, "m": 9, "half_width": 3.0}, "grdi": 1}"#,
        &["run", "curvature"],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grdi"));

    let (out, _) = run_cmd(
        dir.path(),
        r#"{"grid": {"n": 2, "m": "nine", "half_width": 3.0}}"#,
        &["run", "curvature"],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.m"));
}

#[test]
fn flat_field_round_trips_with_zero_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let (out, made) = run_cmd(dir.path(), FLAT2, &["make-field"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&made);
    assert_eq!(rep["sup_f"], 0.0);
    assert!(made.join("field.json").exists() && made.join("field.f64").exists());

    let manifest = made.join("field.json");
    let follow = format!(
        r#"{{"grid": {{"n": 2, "m": 9, "half_width": 3.0}}, "input": "{}"}}"#,
        manifest.display()
    );
    let dir2 = tempfile::tempdir().unwrap();
    let (out, cdir) = run_cmd(dir2.path(), &follow, &["run", "curvature"], &[]);
    assert!(out.status.success());
    let rep = report(&cdir);
    assert_eq!(rep["sup_f"], 0.0);
    assert_eq!(rep["bianchi_residual"], 0.0);
    assert!(cdir.join("curvature.json").exists());
}

#[test]
fn corrupted_archives_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let (out, made) = run_cmd(dir.path(), FLAT2, &["make-field"], &[]);
    assert!(out.status.success());

    let payload = made.join("field.f64");
    let mut bytes = std::fs::read(&payload).unwrap();
    bytes[17] ^= 0xff;
    std::fs::write(&payload, bytes).unwrap();

    let follow = format!(
        r#"{{"grid": {{"n": 2, "m": 9, "half_width": 3.0}}, "input": "{}"}}"#,
        made.join("field.json").display()
    );
    let dir2 = tempfile::tempdir().unwrap();
    let (out, _) = run_cmd(dir2.path(), &follow, &["run", "curvature"], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sha256"));
}

#[test]
fn abelian_linear_has_constant_curvature_and_infinite_entropy() {
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "abelian-linear", "axes": [0, 1], "strength": 1.0}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, cdir) = run_cmd(dir.path(), config, &["run", "curvature"], &[]);
    assert!(out.status.success());
    let rep = report(&cdir);
    // one basis generator: |F|^2 = 2 everywhere
    let sup_f = rep["sup_f"].as_f64().unwrap();
    assert!((sup_f - 2f64.sqrt()).abs() < 1e-12, "sup_f {sup_f}");

    let dir2 = tempfile::tempdir().unwrap();
    let (out, edir) = run_cmd(dir2.path(), config, &["run", "entropy"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&edir);
    assert_eq!(rep["value"], "+inf");
    assert_eq!(rep["argmax_center"], Value::Null);
}

#[test]
fn pure_gauge_curvature_refines_at_high_order() {
    let mut sups = Vec::new();
    for m in [17usize, 25] {
        let config = format!(
            r#"{{
                "grid": {{"n": 2, "m": {m}, "half_width": 3.0}},
                "field": {{"kind": "pure-gauge", "pair": [0, 1], "amplitude": 1e-3}}
            }}"#
        );
        let dir = tempfile::tempdir().unwrap();
        let (out, made) = run_cmd(dir.path(), &config, &["make-field"], &[]);
        assert!(out.status.success());
        sups.push(report(&made)["sup_f"].as_f64().unwrap());
    }
    assert!(sups[0] > 0.0 && sups[1] > 0.0);
    let slope = (sups[0] / sups[1]).ln() / (16f64 / 24.0).ln().abs();
    assert!(slope >= 3.0, "refinement slope {slope:.2} from {sups:?}");
}

#[test]
fn verify_on_flat_is_exact_and_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (out, vdir) = run_cmd(dir.path(), FLAT2, &["run", "verify"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&vdir);
    assert_eq!(rep["passed"], true);
    let checks = rep["generalized"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    for c in checks {
        assert_eq!(c["relative_gap"], 0.0, "{c}");
        assert_eq!(c["pass"], true);
    }
    assert_eq!(rep["gap"]["below_threshold"], true);

    let dir2 = tempfile::tempdir().unwrap();
    let (out, vdir2) = run_cmd(dir2.path(), FLAT2, &["run", "verify"], &[]);
    assert!(out.status.success());
    let a = std::fs::read(vdir.join("report.json")).unwrap();
    let b = std::fs::read(vdir2.join("report.json")).unwrap();
    assert_eq!(a, b, "reports must be byte-identical across runs");
}

#[test]
fn random_fields_are_deterministic_in_the_seed_flag() {
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "random-smooth", "amplitude": 0.2}
    }"#;
    let mut reports = Vec::new();
    for seed in ["5", "5", "6"] {
        let dir = tempfile::tempdir().unwrap();
        let (out, made) = run_cmd(dir.path(), config, &["make-field"], &["--seed", seed]);
        assert!(out.status.success());
        reports.push(std::fs::read(made.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_ne!(reports[0], reports[2]);
}

#[test]
fn unconverged_solves_exit_three_but_still_report() {
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "random-smooth", "amplitude": 0.2},
        "solver": {"max_outer": 1, "cg_max_iters": 2, "target_residual": 1e-30}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, sdir) = run_cmd(dir.path(), config, &["run", "find-soliton"], &[]);
    assert_eq!(out.status.code(), Some(3));
    let rep = report(&sdir);
    assert_eq!(rep["solve"]["converged"], false);
    assert!(sdir.join("soliton.json").exists());
}

#[test]
fn gated_commands_exit_two_away_from_solitons() {
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "random-smooth", "amplitude": 0.3}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_cmd(dir.path(), config, &["run", "spectrum"], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residual"));
}

#[test]
fn strict_mode_escalates_truncation_warnings() {
    // half-width 3 is under five Gaussian widths at t0 = 1
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "flat"}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, fdir) = run_cmd(dir.path(), config, &["run", "functional"], &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!report(&fdir)["warnings"].as_array().unwrap().is_empty());

    let dir2 = tempfile::tempdir().unwrap();
    let (out, _) = run_cmd(dir2.path(), config, &["run", "functional"], &["--strict"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flow_writes_a_trace_and_monotone_diagnostics() {
    let config = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "abelian-linear", "axes": [0, 1], "strength": 0.5},
        "flow": {
            "t_end": 0.05,
            "centers": [{"x0": [0.0, 0.0], "t0": 1.0}],
            "monotonicity": true
        }
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, fdir) = run_cmd(dir.path(), config, &["run", "flow"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&fdir);
    assert_eq!(rep["blowup"], Value::Null);
    assert_eq!(rep["violations"].as_array().unwrap().len(), 0);
    assert_eq!(rep["monotonicity"]["monotone"], true);
    assert!(fdir.join("trace/manifest.json").exists());
    let csv = std::fs::read_to_string(fdir.join("trace/diagnostics.csv")).unwrap();
    assert!(csv.lines().next().unwrap().starts_with("t,dt,sup_F,ym_energy"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn rescale_and_descent_commands_smoke() {
    let rescale = r#"{
        "grid": {"n": 2, "m": 9, "half_width": 3.0},
        "field": {"kind": "abelian-linear", "axes": [0, 1], "strength": 0.5},
        "rescale": {"lambda": 2.0}
    }"#;
    let dir = tempfile::tempdir().unwrap();
    let (out, rdir) = run_cmd(dir.path(), rescale, &["run", "rescale"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let rep = report(&rdir);
    // linear connection doubles, so its curvature quadruples inside the box
    let (fin, fout) = (rep["sup_f_in"].as_f64().unwrap(), rep["sup_f_out"].as_f64().unwrap());
    assert!(fout > 2.0 * fin, "sup_f {fin} -> {fout}");
    assert!(rdir.join("rescaled.json").exists());

    let descent = r#"{
        "grid": {"n": 3, "m": 9, "half_width": 3.0},
        "field": {
            "kind": "descended-extension",
            "axis": 2,
            "inner": {"kind": "random-smooth", "amplitude": 0.25, "compact": true}
        }
    }"#;
    let dir2 = tempfile::tempdir().unwrap();
    let (out, ddir) = run_cmd(dir2.path(), descent, &["run", "descent"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&ddir);
    assert_eq!(rep["report"]["descends"], true);
}
