use std::fs;
use std::path::Path;

use hjb_upwind::cli::{run, EXIT_CFL_REFUSED, EXIT_OK, EXIT_PROPERTY_FAILURE, EXIT_USAGE};
use serde_json::Value;
use tempfile::TempDir;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn hjb(args: &[&str]) -> i32 {
    run(std::iter::once("hjb").chain(args.iter().copied()))
}

fn count_files(dir: &Path) -> usize {
    fs::read_dir(dir).map(|d| d.count()).unwrap_or(0)
}

#[test]
fn solve_writes_slices_and_meta() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "problem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\n");
    let out = tmp.path().join("out");
    assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let values = fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("value_t"))
        .count();
    assert_eq!(values, 41);
    assert_eq!(count_files(&out), 41 + 40 + 1);

    let csv = fs::read_to_string(out.join("value_t40.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,value"));
    assert_eq!(lines.count(), 40);
    // terminal data is zero
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
    let policy = fs::read_to_string(out.join("policy_t1.csv")).unwrap();
    assert!(policy.starts_with("x,value\n"));
    assert!(!out.join("policy_t0.csv").exists());

    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["cfl"]["satisfies_strict"], Value::Bool(true));
    assert_eq!(meta["forced_cfl"], Value::Bool(false));
    assert_eq!(meta["config"]["grid.dx"], "0.05");
    assert!(meta["grid"].is_object());
    assert!(meta["minimizer_stats"].is_object());
}

#[test]
fn solve_csv_numbers_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 0.5\n");
    let out = tmp.path().join("out");
    assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(out.join("value_t0.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn obstacle_solve_writes_two_control_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "problem = obstacle2d\ngrid.dx = 0.2\ngrid.alpha = 0.1\ngrid.horizon = 0.2\n",
    );
    let out = tmp.path().join("out");
    assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let value = fs::read_to_string(out.join("value_t0.csv")).unwrap();
    assert!(value.starts_with("x,y,value\n"));
    assert_eq!(value.lines().count(), 1 + 100);
    let policy = fs::read_to_string(out.join("policy_t1.csv")).unwrap();
    assert!(policy.starts_with("x,y,value_0,value_1\n"));
}

#[test]
fn malformed_config_exits_usage_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    for text in [
        "problem = lqr1d\ngrid.dx 0.05\n",
        "problem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\ngrid.n_space = 20\n",
        "problem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\ngrid.colour = red\n",
        "problem = lqr3d\n",
    ] {
        let cfg = write_config(tmp.path(), text);
        assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_USAGE, "{text}");
        assert!(!out.exists());
    }
    let missing = tmp.path().join("nope.cfg");
    assert_eq!(hjb(&["solve", "--config", missing.to_str().unwrap()]), EXIT_USAGE);
    assert_eq!(hjb(&["frobnicate"]), EXIT_USAGE);
}

#[test]
fn cfl_violation_is_refused_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 1.1\ngrid.horizon = 1.1\n",
    );
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out_s]), EXIT_CFL_REFUSED);
    assert!(!out.exists());
    assert_eq!(hjb(&["solve", "--config", &cfg, "--out", out_s, "--force-cfl"]), EXIT_OK);
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["forced_cfl"], Value::Bool(true));
    assert_eq!(meta["cfl"]["satisfies_strict"], Value::Bool(false));
}

#[test]
fn convergence_needs_two_resolutions() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 0.5\nstudy.dx = 0.1\n");
    assert_eq!(hjb(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_USAGE);
    assert!(!out.exists());

    let cfg = write_config(
        tmp.path(),
        "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 0.5\nstudy.dx = 0.1, 0.05, 0.025\n",
    );
    assert_eq!(hjb(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("dx,dt,err_value,err_input"));
    assert_eq!(csv.lines().count(), 4);
    let orders: Value = serde_json::from_str(&fs::read_to_string(out.join("orders.json")).unwrap()).unwrap();
    let v = orders["fitted_order_value"].as_f64().unwrap();
    assert!(v > 0.7 && v < 1.3, "{v}");
}

#[test]
fn verify_passes_and_forced_cfl_fails() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 0.5\nverify.trials = 20\n",
    );
    let out = tmp.path().join("ok");
    assert_eq!(hjb(&["verify", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "0"]), EXIT_OK);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    let props = report["properties"].as_array().unwrap();
    assert!(props.len() >= 8);
    assert!(props.iter().all(|p| p["passed"] == Value::Bool(true)));
    assert!(props.iter().any(|p| p["name"].as_str().unwrap().contains("monotonicity")));

    let forced = write_config(
        tmp.path(),
        "problem = lqr1d\ngrid.dx = 0.1\ngrid.alpha = 1.1\ngrid.horizon = 1.1\nverify.trials = 20\n",
    );
    let out = tmp.path().join("forced");
    let code = hjb(&["verify", "--config", &forced, "--out", out.to_str().unwrap(), "--force-cfl"]);
    assert_eq!(code, EXIT_PROPERTY_FAILURE);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    let mono = report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "monotonicity")
        .unwrap();
    assert_eq!(mono["passed"], Value::Bool(false));
    assert!(!mono["counterexample"].is_null());
}

#[test]
fn rollout_writes_trajectory_and_validates_start() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "problem = lqr1d\ngrid.dx = 0.05\ngrid.alpha = 0.5\n");
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(hjb(&["rollout", "--config", &cfg, "--out", out_s, "--x0", "1.5"]), EXIT_USAGE);
    assert_eq!(hjb(&["rollout", "--config", &cfg, "--out", out_s, "--x0", "0.1,0.1"]), EXIT_USAGE);
    assert!(!out.exists());

    assert_eq!(hjb(&["rollout", "--config", &cfg, "--out", out_s, "--x0", "0.5"]), EXIT_OK);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,a,running_cost"));
    assert_eq!(lines.count(), 41);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("rollout.json")).unwrap()).unwrap();
    let total = summary["total_cost"].as_f64().unwrap();
    let value = summary["value_at_x0"].as_f64().unwrap();
    assert!((total - value).abs() < 0.05);
}

#[test]
fn rollout_with_null_dynamics_stays_put() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "problem = custom\ncustom.gain = 0\ngrid.dx = 0.1\ngrid.alpha = 0.5\nrollout.x0 = -0.3\n",
    );
    let out = tmp.path().join("out");
    assert_eq!(hjb(&["rollout", "--config", &cfg, "--out", out.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let x: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x, -0.3);
    }
}
