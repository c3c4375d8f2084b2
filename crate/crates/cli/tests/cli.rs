use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;

use maggeo::loops::great_circle;
use maggeo::{Loop, Rotation3, UnitVec3};
use nalgebra::Vector3;
use serde_json::Value;
use tempfile::TempDir;

const LINEAR_Z: &str = r#"{"type":"preset","name":"linear_z"}"#;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn maggeo(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_maggeo")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn out(&self) -> PathBuf {
        self.path("out")
    }

    fn config(&self, name: &str, field: &str, extra: &str) -> String {
        let path = self.path(name);
        let text =
            format!(r#"{{"field":{field},"epsilon":0.05,"output_dir":{:?}{extra}}}"#, self.out().to_str().unwrap());
        std::fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn write_loop(&self, name: &str, u: &Loop) -> String {
        let path = self.path(name);
        std::fs::write(&path, u.to_csv()).unwrap();
        path.to_str().unwrap().to_string()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&std::fs::read_to_string(self.out().join(name)).unwrap()).unwrap()
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.out().join(name)).unwrap()
    }
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect()
}

#[test]
fn melnikov_scan_linear_z() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, "");
    let run = maggeo(&["melnikov-scan", &cfg]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc = ws.json("critical_points.json");
    let points = doc["critical_points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    for p in points {
        let z = num(&p["z"][2]);
        assert!((z.abs() - 1.0).abs() < 1e-10);
        assert!((num(&p["value"]) - PI * z).abs() < 1e-8);
    }
    assert_eq!(ws.json("distinctness.json")["condition_holds"], Value::Bool(false));
    let grid = csv_rows(&ws.read("melnikov_grid.csv"));
    assert_eq!(grid.len(), 32);
    for row in grid {
        assert!((row[3] - PI * row[2]).abs() < 1e-8);
    }
}

#[test]
fn melnikov_scan_constant_field_is_flagged() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", r#"{"type":"preset","name":"constant_one"}"#, "");
    let run = maggeo(&["melnikov-scan", &cfg]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(ws.json("critical_points.json")["constant_landscape"], Value::Bool(true));
}

#[test]
fn config_errors_exit_2() {
    let ws = Workspace::new();
    for (name, field, extra) in [
        ("a.json", r#"{"type":"preset","name":"quadratic"}"#, ""),
        ("b.json", r#"{"type":"polynomial","terms":[{"exps":[1,0],"coef":1.0}]}"#, ""),
        ("c.json", LINEAR_Z, r#","loop_points":30"#),
    ] {
        let cfg = ws.config(name, field, extra);
        let run = maggeo(&["melnikov-scan", &cfg]);
        assert_eq!(run.code, 2, "{name}: {}", run.stderr);
        assert!(run.stderr.starts_with("error:"));
    }
    assert_eq!(maggeo(&["solve", ws.path("missing.json").to_str().unwrap()]).code, 2);
    let cfg = ws.config("d.json", LINEAR_Z, "");
    assert_eq!(maggeo(&["landscape", &cfg, "--epsilon", "0.9"]).code, 2);
}

#[test]
fn solve_then_shoot_then_verify() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, "");
    let run = maggeo(&["solve", &cfg]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = ws.json("solve_report.json");
    let sols = report["runs"][0]["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 2);
    for (k, s) in sols.iter().enumerate() {
        assert_eq!(s["file"], format!("solve_eps0.05_sol{k}.csv"));
        assert_eq!(s["distinct_pair"], Value::Bool(true));
        assert_eq!(s["embedded"], Value::Bool(true));
        assert!(num(&s["oracle_distance"]) <= 1e-5);
    }

    let file = ws.out().join("solve_eps0.05_sol0.csv");
    let file = file.to_str().unwrap();
    let shot = maggeo(&["shoot", &cfg, "--loop", file]);
    assert_eq!(shot.code, 0, "{}", shot.stderr);
    let doc = ws.json("shoot_report.json");
    assert!(num(&doc["oracle_distance"]) <= 1e-5);
    assert!(num(&doc["closure_error"]) <= 1e-8);
    assert!(Loop::from_csv(&ws.read("shoot_orbit.csv")).is_ok());

    let verify = maggeo(&["verify", &cfg, "--loop", file]);
    assert_eq!(verify.code, 0, "{}", verify.stderr);
    let doc: Value = serde_json::from_str(&verify.stdout).unwrap();
    assert!(num(&doc["residual"]) <= 1e-9);
    assert!(num(&doc["speed_cv"]) <= 1e-8);
    assert!(num(&doc["curvature_error"]) <= 1e-6);
    assert_eq!(doc["embedded"], Value::Bool(true));
    let e = &doc["energy"];
    let total = num(&e["length"]) + num(&e["epsilon"]) * num(&e["area"]);
    assert!((num(&e["energy"]) - total).abs() < 1e-15);
}

#[test]
fn solve_on_constant_field_reports_the_circle_family() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", r#"{"type":"preset","name":"constant_one"}"#, r#","seeds":8"#);
    let run = maggeo(&["solve", &cfg]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let r = &ws.json("solve_report.json")["runs"][0];
    assert_eq!(r["degenerate_landscape"], Value::Bool(true));
    assert!(r["note"].as_str().unwrap().contains("geodesic curvature 5.0000000000000003e-2"));
    let s = &r["solutions"][0];
    assert_eq!(s["classification"], "degenerate");
    assert!(num(&s["curvature_error"]) < 1e-9);
}

#[test]
fn shoot_zero_field_equator() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", r#"{"type":"polynomial","terms":[]}"#, "");
    let equator = ws.write_loop("eq.csv", &great_circle(&Rotation3::identity(), 128).unwrap());
    let run = maggeo(&["shoot", &cfg, "--loop", &equator, "--epsilon", "0.1"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc = ws.json("shoot_report.json");
    assert!((num(&doc["period"]) - 2.0 * PI / 10.0).abs() < 1e-8);
    assert!(num(&doc["oracle_distance"]) < 1e-8);
}

#[test]
fn bad_loop_files() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, "");
    let missing = ws.path("nope.csv");
    assert_eq!(maggeo(&["shoot", &cfg, "--loop", missing.to_str().unwrap()]).code, 2);
    assert_eq!(maggeo(&["verify", &cfg, "--loop", missing.to_str().unwrap()]).code, 2);

    let text = great_circle(&Rotation3::identity(), 64).unwrap().to_csv();
    let corrupted = ws.path("bad.csv");
    std::fs::write(&corrupted, &text[..text.len() / 2]).unwrap();
    assert_eq!(maggeo(&["shoot", &cfg, "--loop", corrupted.to_str().unwrap()]).code, 2);

    let point = Loop::from_fn(64, |_| Vector3::new(0.0, 0.0, 1.0)).unwrap();
    let constant = ws.write_loop("const.csv", &point);
    let run = maggeo(&["verify", &cfg, "--loop", &constant]);
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(run.stderr.contains("degenerate curve"));
}

#[test]
fn verify_raw_great_circle_reports_order_eps_residual() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, "");
    let tilt = 0.6;
    let r = Rotation3::from_axis_angle(&UnitVec3::e1(), tilt);
    let circle = ws.write_loop("tilted.csv", &great_circle(&r, 128).unwrap());
    let run = maggeo(&["verify", &cfg, "--loop", &circle]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let doc: Value = serde_json::from_str(&run.stdout).unwrap();
    // J_eps(omega) = eps K(omega) omega ^ omega', and max K = sin(tilt) on this circle
    assert!((num(&doc["residual"]) - 0.05 * tilt.sin()).abs() < 1e-10);
    assert!((num(&doc["curvature_error"]) - 0.05 * tilt.sin()).abs() < 1e-10);
}

#[test]
fn landscape_examples() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, r#","seeds":24"#);
    let run = maggeo(&["landscape", &cfg, "--epsilon", "0"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let text = ws.read("landscape.csv");
    assert!(text.starts_with("z_x,z_y,z_z,E,E0\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| (r[3] - 1.0).abs() < 1e-14 && r[4] == 1.0));

    let run = maggeo(&["landscape", &cfg]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let rows = csv_rows(&ws.read("landscape.csv"));
    let gap = rows.iter().map(|r| (r[3] - r[4]).abs()).fold(0.0, f64::max);
    assert!(gap <= 0.1 * 0.05 * PI / (2.0 * PI), "{gap:e}");
}

#[test]
fn several_epsilons_get_separate_files() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, r#","seeds":8"#);
    let run = maggeo(&["landscape", &cfg, "--epsilon", "0.1,0.05"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(ws.out().join("landscape_eps0.1.csv").exists());
    assert!(ws.out().join("landscape_eps0.05.csv").exists());
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identical_configs_give_identical_bytes() {
    let ws = Workspace::new();
    let cfg = ws.config("c.json", LINEAR_Z, r#","seeds":12"#);
    let mut snaps = Vec::new();
    for _ in 0..2 {
        assert_eq!(maggeo(&["melnikov-scan", &cfg]).code, 0);
        assert_eq!(maggeo(&["landscape", &cfg]).code, 0);
        snaps.push(snapshot(&ws.out()));
        std::fs::remove_dir_all(ws.out()).unwrap();
    }
    assert_eq!(snaps[0], snaps[1]);
}

#[test]
fn strong_field_at_large_eps_exits_3() {
    let ws = Workspace::new();
    let wild = r#"{"type":"polynomial","terms":[{"exps":[3,1,0],"coef":8.0},{"exps":[0,0,1],"coef":3.0},{"exps":[2,0,2],"coef":-6.0}]}"#;
    let cfg = ws.config("c.json", wild, r#","seeds":8"#);
    let run = maggeo(&["solve", &cfg, "--epsilon", "0.4"]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert!(run.stderr.contains("seed 0"));
}
