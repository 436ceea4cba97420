use std::path::Path;
use std::process::{Command, Output};

fn apfguard(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apfguard"))
        .args(args)
        .env("APFGUARD_OUT", out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn metrics(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("metrics.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn head_on_run_is_safe() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(&["run", "--scenario", "head_on"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = metrics(dir.path());
    assert!(m["min_filtered_margin"].as_f64().unwrap() > 0.0);
    assert!(m["conflict_events"].as_array().unwrap().is_empty());
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace
        .starts_with("t,vid,px,py,vx,vy,xix,xiy,vcx,vcy,dwp,oid_0,dxi_0,dp_0,theta_0,Vo_0,ao_0\n"));
    // 0 .. 60 s at 0.01 s plus the header
    assert_eq!(trace.lines().count(), 6002);
    assert!(stdout(&o).contains("a2_initial_separation"));
}

#[test]
fn pursuer_run_signals_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &[
            "run",
            "--scenario",
            "pursuer_demo",
            "--override",
            "obstacle.v_o_max=9",
            "--trace-every",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(!metrics(dir.path())["conflict_events"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["run", "--scenario", "nosuch"],
        &["run", "--scenario", "head_on", "--override", "colour=blue"],
        &["run", "--scenario", "head_on", "--override", "k2"],
        &["run", "--scenario", "head_on", "--dt", "-0.1"],
        &["run"],
        &["fly"],
    ];
    for args in cases {
        let o = apfguard(args, dir.path());
        assert_eq!(code(&o), 1, "{args:?}");
    }
    let o = apfguard(
        &["run", "--scenario", "head_on", "--override", "colour=blue"],
        dir.path(),
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
    // nothing executed
    assert!(!dir.path().join("trace.csv").exists());
}

#[test]
fn overrides_reach_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &[
            "run",
            "--scenario",
            "head_on",
            "--t-end",
            "2",
            "--override",
            "k2=3",
            "--trace-every",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let m = metrics(dir.path());
    assert_eq!(m["t_end"].as_f64(), Some(2.0));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 21);
}

#[test]
fn scenario_file_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = apfguard::scenario_io::builtin("converge_left").unwrap();
    let path = dir.path().join("scenario.toml");
    std::fs::write(&path, apfguard::scenario_io::save(&cfg).unwrap()).unwrap();
    let o = apfguard(
        &[
            "run",
            "--scenario",
            path.to_str().unwrap(),
            "--trace-every",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("converge_left"));
}

#[test]
fn identical_runs_write_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = apfguard(
            &["run", "--scenario", "nonparallel_4", "--seed", "11"],
            d.path(),
        );
        assert_eq!(code(&o), 0);
    }
    for f in ["trace.csv", "metrics.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn out_flag_beats_environment() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &[
            "run",
            "--scenario",
            "head_on",
            "--t-end",
            "1",
            "--out",
            flag_dir.path().to_str().unwrap(),
        ],
        env_dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(flag_dir.path().join("metrics.json").exists());
    assert!(!env_dir.path().join("metrics.json").exists());
}

#[test]
fn list_names_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(&["list"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    for name in apfguard::scenario_io::BUILTIN_NAMES {
        assert!(text.contains(name));
    }
}

#[test]
fn verify_single_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(&["verify", "--only", "eigen"], dir.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("eigen") && rows[0].contains("pass"));
}

#[test]
fn verify_tolerance_below_precision_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &[
            "verify",
            "--only",
            "line_integral",
            "--tolerance",
            "line_integral=1e-20",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("FAIL"));
    let o = apfguard(
        &["verify", "--only", "eigen", "--tolerance", "nosuch=1"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    let o = apfguard(&["verify", "--only", "nosuch"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_json_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &["verify", "--only", "gradient", "--format", "json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["name"], "gradient");
    assert!(v[0]["worst_violation"].as_f64().unwrap() <= 1e-4);
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("eps,gamma,status,min_filtered_margin"));
    lines
        .map(|l| l.splitn(9, ',').map(str::to_string).collect())
        .collect()
}

#[test]
fn head_on_sweep_is_conflict_free() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(&["sweep", "--scenario", "head_on"], dir.path());
    assert_eq!(code(&o), 0);
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 9);
    for r in &rows {
        if r[1] == "1.5" {
            // gamma r_s reaches r_a for this vehicle: empty repulsion window
            assert_eq!(r[2], "invalid_config");
        } else {
            assert_eq!(r[2], "ok");
            assert!(r[3].parse::<f64>().unwrap() > 0.0);
        }
    }
}

#[test]
fn fast_pursuer_sweep_conflicts_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let o = apfguard(
        &[
            "sweep",
            "--scenario",
            "pursuer_demo",
            "--override",
            "obstacle.v_o_max=12",
            "--override",
            "vehicle.r_a=10",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[2] == "conflict"));
}
