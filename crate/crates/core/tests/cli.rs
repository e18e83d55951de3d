use std::path::Path;
use std::process::Command;

const TINY: &str = r#"{
  "model": { "q": 2, "p": 0, "theta": 0.0, "mass": 1.0 },
  "grid": { "box_length": 16.0, "points_per_dim": 32 },
  "potential": {
    "kind": "V0",
    "a": { "center": 0.0, "half_width": 1.0, "amplitude": 0.5 },
    "b": { "shape": "gaussian", "width": 1.5, "amplitude": 1.0, "center": [0.0] }
  },
  "integrator": { "method": "rk4-interaction-picture", "dt": 0.01, "dyson_order": 2 },
  "fock": { "num_modes": 4 },
  "tolerances": { "algebraic": 1e-10, "quadrature": 1e-8, "integrator": 1e-8 },
  "seed": 7
}"#;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_moyal-scatter")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn schema_errors_exit_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (TINY.replace(r#""half_width": 1.0, "#, ""), "potential.a"),
        (TINY.replace(r#""seed": 7"#, r#""seed": 7, "colour": 1"#), "colour"),
        (TINY.replace(r#""points_per_dim": 32"#, r#""points_per_dim": "many""#), "grid.points_per_dim"),
        (TINY.replace(r#""integrator": 1e-8"#, r#""integrator": 0.0"#), "tolerances.integrator"),
        (TINY.replace(r#""kind": "V0""#, r#""kind": "V3""#), "potential.kind"),
        (TINY.replace(r#""num_modes": 4"#, r#""num_modes": 5"#), "fock.num_modes"),
    ];
    for (text, path) in cases {
        let cfg = write_config(dir.path(), &text);
        let out = run(&["star-check", "--config", &cfg, "--out-dir", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{path}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(path), "{path}: {err}");
    }
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["star-check", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let cfg = write_config(dir.path(), TINY);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run(&["star-check", "--config", &cfg, "--out-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn report_is_deterministic_and_indexed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let o = dir.path().join(name);
        let out = run(&["fock-check", "--config", &cfg, "--out-dir", o.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(o.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(v["verdict"], "pass");
    assert_eq!(v["config"]["seed"], 7);
    for a in v["artifacts"].as_array().unwrap() {
        assert!(dir.path().join("a").join(a.as_str().unwrap()).exists());
    }
    let ids: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    let mut uniq = ids.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), ids.len());
}

#[test]
fn star_check_runs_on_tiny_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = dir.path().join("o");
    let out = run(&["star-check", "--config", &cfg, "--out-dir", o.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(o.join("report.json")).unwrap()).unwrap();
    let oracle = v["checks"].as_array().unwrap().iter().find(|c| c["id"] == "star.quadrature_oracle").unwrap();
    assert_eq!(oracle["status"], "skipped");
}
