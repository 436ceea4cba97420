use std::f64::consts::PI;

use apfguard::dynamics::{filtered_separation_threshold, velocity_margin_radius};
use apfguard::multiobs::validate;
use apfguard::scenario_io::{builtin, load_str, save, BUILTIN_NAMES};
use apfguard::sim::{run, run_with, trace_header, write_trace_csv};
use apfguard::{Error, ObstacleBehavior, ScenarioConfig, TraceRecord};

/// Built-ins with obstacles, short enough to run in full here.
const OBSTACLE_SCENARIOS: [&str; 6] = [
    "head_on",
    "converge_left",
    "parallel_v",
    "parallel_v_no_combine",
    "nonparallel_4",
    "pursuer_demo",
];

#[test]
fn builtins_round_trip() {
    for name in BUILTIN_NAMES {
        let cfg = builtin(name).unwrap();
        let text = save(&cfg).unwrap();
        let back = load_str(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(save(&back).unwrap(), text, "{name}");
    }
}

#[test]
fn builtins_meet_assumptions_except_pursuer() {
    for name in BUILTIN_NAMES {
        let report = validate(&builtin(name).unwrap());
        if name == "pursuer_demo" {
            assert!(!report.speed_passed());
            // the chaser is not a constant-velocity obstacle either
            assert!(report.a1_constant_velocity.iter().all(|c| !c.pass));
            assert!(report.a2_initial_separation.iter().all(|c| c.pass));
        } else {
            assert!(report.passed(), "{name}: {:?}", report.failures());
        }
    }
}

#[test]
fn save_rejects_non_finite() {
    let mut cfg = builtin("head_on").unwrap();
    cfg.obstacles[0].v_o.x = f64::NAN;
    assert!(matches!(save(&cfg), Err(Error::Serialization(m)) if m.contains("v_o")));
}

#[test]
fn load_reports_position_and_unknown_keys() {
    let text = save(&builtin("head_on").unwrap()).unwrap();
    let broken = text.replacen("t_end = 60.0", "t_end = sixty", 1);
    match load_str(&broken) {
        Err(Error::Parse { line, column, .. }) => {
            let expected = broken.lines().position(|l| l.starts_with("t_end")).unwrap() + 1;
            assert_eq!(line, expected);
            assert!(column > 1);
        }
        other => panic!("{other:?}"),
    }
    let extra = format!("colour = \"red\"\n{text}");
    assert!(matches!(
        load_str(&extra),
        Err(Error::Parse { line: 1, .. })
    ));
    let inverted = text.replacen("r_a = 7.5", "r_a = 4.0", 1);
    assert!(matches!(load_str(&inverted), Err(e) if e.to_string().contains("r_a > r_s")));
}

#[test]
fn hand_written_file_with_defaults() {
    let text = r#"
name = "tiny"
t_end = 3.0

[[vehicles]]
waypoint = [10.0, 0.0]
params = { l = 5.0, v_m = 6.0, r_s = 5.0, r_a = 7.5 }
initial = { p = [0.0, 0.0], v = [0.0, 0.0] }
"#;
    let cfg = load_str(text).unwrap();
    assert_eq!(cfg.dt, 0.01);
    assert!(cfg.obstacles.is_empty());
    let (trace, m) = run(&cfg).unwrap();
    assert_eq!(trace.len(), 301);
    assert_eq!(m.min_filtered_margin, None);
}

fn csv(cfg: &ScenarioConfig, trace: &[TraceRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_trace_csv(&mut out, trace, cfg.obstacles.len()).unwrap();
    out
}

#[test]
fn runs_are_byte_identical() {
    for name in ["nonparallel_4", "parallel_v"] {
        let cfg = builtin(name).unwrap();
        let (a, ma) = run(&cfg).unwrap();
        let (b, mb) = run(&cfg).unwrap();
        assert_eq!(csv(&cfg, &a), csv(&cfg, &b));
        assert_eq!(ma, mb);
    }
}

#[test]
fn trace_schema() {
    let cfg = builtin("parallel_v").unwrap();
    let (trace, _) = run_with(&cfg, 100).unwrap();
    let text = String::from_utf8(csv(&cfg, &trace)).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, trace_header(5));
    let width = header.split(',').count();
    assert_eq!(width, 11 + 6 * 5);
    assert!(lines.all(|l| l.split(',').count() == width));
}

#[test]
fn margin_metric_matches_trace() {
    for name in OBSTACLE_SCENARIOS {
        let cfg = builtin(name).unwrap();
        let (trace, m) = run(&cfg).unwrap();
        let r_s = cfg.vehicles[0].params.r_s;
        let recomputed = trace
            .iter()
            .flat_map(|r| r.obstacles[0].iter().zip(&cfg.obstacles))
            .map(|(o, ob)| o.dxi - (r_s + ob.r_o))
            .fold(f64::INFINITY, f64::min);
        let metric = m.min_filtered_margin.unwrap();
        assert!(
            (recomputed - metric).abs() <= 1e-12,
            "{name}: {recomputed} vs {metric}"
        );
        assert_eq!(m.has_conflict(), metric <= 0.0, "{name}");
    }
}

#[test]
fn filtered_separation_implies_physical_separation() {
    let mut exercised = 0;
    for name in OBSTACLE_SCENARIOS {
        let cfg = builtin(name).unwrap();
        let (trace, _) = run(&cfg).unwrap();
        let vp = cfg.vehicles[0].params;
        for (k, ob) in cfg.obstacles.iter().enumerate() {
            let r = vp.r_s + ob.r_o;
            let r_v = velocity_margin_radius(vp.v_m, ob.speed_bound(), vp.l).unwrap();
            let thr = filtered_separation_threshold(r, r_v);
            let min_dxi = trace
                .iter()
                .map(|t| t.obstacles[0][k].dxi)
                .fold(f64::INFINITY, f64::min);
            let min_dp = trace
                .iter()
                .map(|t| t.obstacles[0][k].dp)
                .fold(f64::INFINITY, f64::min);
            let dp0 = trace[0].obstacles[0][k].dp;
            if min_dxi >= thr && dp0 >= r {
                exercised += 1;
                assert!(min_dp >= r, "{name} obstacle {k}: {min_dp} < {r}");
            }
        }
    }
    assert!(exercised >= 5, "only {exercised} pairs met the premise");
}

#[test]
fn approach_angle_settles_opposite() {
    for name in OBSTACLE_SCENARIOS {
        let cfg = builtin(name).unwrap();
        let (_, m) = run_with(&cfg, 0).unwrap();
        // the uncombined V formation drags the vehicle along for the whole run
        if m.has_conflict() || name == "parallel_v_no_combine" {
            continue;
        }
        for (k, ob) in cfg.obstacles.iter().enumerate() {
            let theta = m.final_theta[0][k].unwrap();
            if name == "head_on" {
                // exactly aligned start is the unstable fixed point
                assert_eq!(theta, 0.0);
            } else if matches!(ob.behavior, ObstacleBehavior::ConstantVelocity)
                && ob.v_o.norm() > 0.0
            {
                assert!(
                    (PI - 0.1..=PI).contains(&theta),
                    "{name} obstacle {k}: {theta}"
                );
            }
        }
    }
}

#[test]
fn scenario_outcomes() {
    let (_, m) = run_with(&builtin("head_on").unwrap(), 0).unwrap();
    assert!(m.min_filtered_margin.unwrap() > 0.0);
    assert_eq!(m.arrival_time, None);

    let (_, m) = run_with(&builtin("parallel_v_no_combine").unwrap(), 0).unwrap();
    assert_eq!(m.arrival_time, None);
    assert!(m.deadlock);

    let (_, m) = run_with(&builtin("parallel_v").unwrap(), 0).unwrap();
    assert!(!m.has_conflict() && !m.deadlock);
    assert!(m.arrival_time.unwrap() <= 100.0);

    let (_, m) = run_with(&builtin("pursuer_demo").unwrap(), 0).unwrap();
    assert!(m.has_conflict());
}
