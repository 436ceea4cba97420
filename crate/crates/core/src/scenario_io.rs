//! Scenario files (TOML) and the built-in scenario set.
//!
//! A scenario file mirrors [`ScenarioConfig`]:
//!
//! ```toml
//! name = "head_on"
//! dt = 0.01
//! t_end = 60.0
//!
//! [guidance]
//! k1 = 1.0
//! k2 = 10.0
//! eps = 0.0001
//! eps_s = 0.1
//! gamma = 1.2
//!
//! [options]
//! combine_parallel = false
//! selection_policy = "all_within"
//!
//! [[vehicles]]
//! waypoint = [0.0, 0.0]
//! params = { l = 5.0, v_m = 6.0, r_s = 5.0, r_a = 7.5 }
//! initial = { p = [0.0, 0.0], v = [0.0, 0.0] }
//!
//! [[obstacles]]
//! p_o = [30.0, 0.0]
//! v_o = [-5.0, 0.0]
//! r_o = 10.0
//! v_o_max = 5.0
//! behavior = { kind = "constant_velocity" }
//! ```
//!
//! `guidance` and `options` may be omitted and take their defaults. Unknown
//! keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{MulticopterState, Obstacle, ObstacleBehavior, VehicleParams};
use crate::error::{Error, Result};
use crate::guidance::GuidanceParams;
use crate::mathcore::Vec2;
use crate::multiobs::closest_approach;
use crate::sim::{ScenarioConfig, SimOptions, VehicleConfig};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "head_on",
    "converge_left",
    "parallel_v",
    "parallel_v_no_combine",
    "nonparallel_4",
    "super_41",
    "pursuer_demo",
];

/// Seed used for the randomized built-in when none is given.
pub const DEFAULT_SEED: u64 = 7;

pub fn list() -> &'static [&'static str] {
    &BUILTIN_NAMES
}

/// One-line description of a built-in.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "head_on" => "hovering vehicle, one obstacle approaching head on",
        "converge_left" => "one obstacle crossing from the left",
        "parallel_v" => "five obstacles in a V formation, combined into one disc",
        "parallel_v_no_combine" => "the V formation avoided obstacle by obstacle",
        "nonparallel_4" => "four obstacles on seeded non-parallel tracks",
        "super_41" => "41 vehicles crossing through a common center",
        "pursuer_demo" => "an obstacle that chases the vehicle",
        _ => return None,
    })
}

fn params(l: f64, v_m: f64, r_s: f64, r_a: f64) -> VehicleParams {
    VehicleParams { l, v_m, r_s, r_a }
}

fn vehicle(p: Vec2, waypoint: Vec2, params: VehicleParams) -> VehicleConfig {
    VehicleConfig {
        params,
        initial: MulticopterState::new(p, Vec2::ZERO),
        waypoint,
    }
}

fn base(
    name: &str,
    t_end: f64,
    vehicles: Vec<VehicleConfig>,
    obstacles: Vec<Obstacle>,
) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        dt: 0.01,
        t_end,
        guidance: GuidanceParams::default(),
        options: SimOptions::default(),
        vehicles,
        obstacles,
    }
}

fn head_on() -> ScenarioConfig {
    base(
        "head_on",
        60.0,
        vec![vehicle(Vec2::ZERO, Vec2::ZERO, params(5.0, 6.0, 5.0, 7.5))],
        vec![Obstacle::constant_velocity(
            Vec2::new(30.0, 0.0),
            Vec2::new(-5.0, 0.0),
            10.0,
        )],
    )
}

fn converge_left() -> ScenarioConfig {
    base(
        "converge_left",
        90.0,
        vec![vehicle(
            Vec2::new(-30.0, 0.0),
            Vec2::new(30.0, 0.0),
            params(5.0, 6.0, 5.0, 7.5),
        )],
        vec![Obstacle::constant_velocity(
            Vec2::new(0.0, 30.0),
            Vec2::new(0.0, -5.0),
            10.0,
        )],
    )
}

fn parallel_v(combine: bool) -> ScenarioConfig {
    let obstacles = (1..=5)
        .map(|i| {
            let i = i as f64;
            Obstacle::constant_velocity(
                Vec2::new(15.0 * i - 45.0, 70.0 - 15.0 * (i - 3.0).abs()),
                Vec2::new(0.0, -8.0),
                10.0 + 2.0 * i,
            )
        })
        .collect();
    let name = if combine {
        "parallel_v"
    } else {
        "parallel_v_no_combine"
    };
    let mut cfg = base(
        name,
        120.0,
        vec![vehicle(
            Vec2::new(20.0, -30.0),
            Vec2::new(20.0, 30.0),
            params(5.0, 10.0, 5.0, 7.5),
        )],
        obstacles,
    );
    cfg.options.combine_parallel = combine;
    cfg
}

/// Four constant-velocity obstacles crossing the vehicle's route.
///
/// Each obstacle is aimed at a random point of the straight route and
/// reaches it around the time the vehicle would. Draws are rejected until
/// every pair stays `2 r_a + r_i + r_j` apart for all future time and the
/// vehicle starts clear of every safety area.
fn nonparallel_4(seed: u64) -> ScenarioConfig {
    let vp = params(5.0, 9.0, 5.0, 7.5);
    let start = Vec2::new(50.0, -50.0);
    let wp = Vec2::new(-50.0, 50.0);
    let route = wp - start;
    let cruise = route.norm() / vp.v_m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles: Vec<Obstacle> = Vec::with_capacity(4);
    let mut attempts = 0usize;
    while obstacles.len() < 4 {
        attempts += 1;
        if attempts > 100_000 {
            // start over with what has been drawn so far discarded
            obstacles.clear();
            attempts = 0;
        }
        let i = obstacles.len() + 1;
        let r_o = 10.0 + 2.0 * i as f64;
        let s: f64 = rng.gen_range(0.2..0.8);
        let heading: f64 = rng.gen_range(0.0..2.0 * PI);
        let speed: f64 = rng.gen_range(5.0..8.5);
        let lag: f64 = rng.gen_range(-0.3..0.3);
        let t_cross = (s + lag) * cruise * 1.3 + 2.0;
        if t_cross <= 1.0 {
            continue;
        }
        let v_o = Vec2::from_angle(heading) * speed;
        let p_o = start + route * s - v_o * t_cross;
        let cand = Obstacle {
            p_o,
            v_o,
            r_o,
            behavior: ObstacleBehavior::ConstantVelocity,
            v_o_max: 10.0,
        };
        let xi = start;
        let clear_start = xi.distance(cand.xi(vp.l)) > vp.r_a + r_o + 5.0;
        let spaced = obstacles.iter().all(|o| {
            let need = 2.0 * vp.r_a + o.r_o + cand.r_o;
            closest_approach(o.p_o - cand.p_o, o.v_o - cand.v_o, f64::INFINITY).0 >= need
        });
        if clear_start && spaced {
            obstacles.push(cand);
        }
    }
    base(
        "nonparallel_4",
        120.0,
        vec![vehicle(start, wp, vp)],
        obstacles,
    )
}

fn super_41() -> ScenarioConfig {
    let mut vehicles = Vec::with_capacity(41);
    for i in 1..=41usize {
        let v_m = 5.0 + (i as f64 - 1.0) / 8.0;
        let vp = params(5.0, v_m, 15.0, 22.5);
        let (p, wp) = if i <= 40 {
            let radius = if i <= 20 { 400.0 } else { 200.0 };
            let a0 = (i as f64 - 1.0) * PI / 10.0;
            let a1 = (i as f64 + 9.0) * PI / 10.0;
            (Vec2::from_angle(a0) * radius, Vec2::from_angle(a1) * radius)
        } else {
            (Vec2::new(405.0, 0.0), Vec2::new(-350.0, -350.0))
        };
        vehicles.push(vehicle(p, wp, vp));
    }
    let mut cfg = base("super_41", 400.0, vehicles, Vec::new());
    cfg.options.peers_as_obstacles = true;
    cfg.options.peer_radius = 0.0;
    cfg
}

fn pursuer_demo() -> ScenarioConfig {
    let mut cfg = head_on();
    cfg.name = "pursuer_demo".into();
    cfg.t_end = 200.0;
    let ob = &mut cfg.obstacles[0];
    ob.behavior = ObstacleBehavior::Pursuer { eps1: 0.1 };
    ob.v_o_max = 9.0;
    cfg
}

/// Built-in scenario by name, randomized parts drawn from [`DEFAULT_SEED`].
pub fn builtin(name: &str) -> Result<ScenarioConfig> {
    builtin_with_seed(name, DEFAULT_SEED)
}

/// Built-in scenario; `seed` only affects `nonparallel_4`.
pub fn builtin_with_seed(name: &str, seed: u64) -> Result<ScenarioConfig> {
    Ok(match name {
        "head_on" => head_on(),
        "converge_left" => converge_left(),
        "parallel_v" => parallel_v(true),
        "parallel_v_no_combine" => parallel_v(false),
        "nonparallel_4" => nonparallel_4(seed),
        "super_41" => super_41(),
        "pursuer_demo" => pursuer_demo(),
        other => return Err(Error::UnknownScenario(other.to_string())),
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, column)
}

/// Parses and validates scenario text.
pub fn load_str(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a scenario file.
pub fn load(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    load_str(&text)
}

fn first_non_finite(v: &toml::Value, path: &str) -> Option<String> {
    match v {
        toml::Value::Float(x) if !x.is_finite() => Some(path.to_string()),
        toml::Value::Array(a) => a
            .iter()
            .enumerate()
            .find_map(|(i, x)| first_non_finite(x, &format!("{path}[{i}]"))),
        toml::Value::Table(t) => t.iter().find_map(|(k, x)| {
            let p = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            first_non_finite(x, &p)
        }),
        _ => None,
    }
}

/// Serializes a scenario; floats are written so that loading gives them back
/// bit for bit.
pub fn save(cfg: &ScenarioConfig) -> Result<String> {
    let value = toml::Value::try_from(cfg).map_err(|e| Error::Serialization(e.to_string()))?;
    if let Some(path) = first_non_finite(&value, "") {
        return Err(Error::Serialization(format!("field {path} is not finite")));
    }
    toml::to_string(cfg).map_err(|e| Error::Serialization(e.to_string()))
}

const VEHICLE_PARAM_KEYS: [&str; 4] = ["l", "v_m", "r_s", "r_a"];
const GUIDANCE_KEYS: [&str; 5] = ["k1", "k2", "eps", "eps_s", "gamma"];

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_in(table: &mut toml::Table, field: &str, value: &toml::Value) {
    table.insert(field.to_string(), value.clone());
}

/// Applies one `key=value` override.
///
/// Keys are `dt`, `t_end`, `name`, a bare guidance gain (`k2`),
/// `guidance.<field>`, `options.<field>`, `vehicle.<field>` (every vehicle;
/// `l`, `v_m`, `r_s`, `r_a` address its parameters) and `obstacle.<field>`
/// (every obstacle). Values use TOML syntax; a bare word is taken as a
/// string. Unknown keys and ill-typed values are rejected.
pub fn apply_override(cfg: &mut ScenarioConfig, key: &str, raw: &str) -> Result<()> {
    let bad = |why: String| Error::InvalidArgument(format!("override `{key}={raw}`: {why}"));
    let value = parse_override_value(raw);
    let mut root =
        match toml::Value::try_from(&*cfg).map_err(|e| Error::Serialization(e.to_string()))? {
            toml::Value::Table(t) => t,
            _ => unreachable!("scenario serializes to a table"),
        };
    let (head, field) = match key.split_once('.') {
        Some((h, f)) => (h, Some(f)),
        None => (key, None),
    };
    match (head, field) {
        ("dt" | "t_end" | "name", None) => set_in(&mut root, head, &value),
        (g, None) if GUIDANCE_KEYS.contains(&g) => {
            let t = root
                .entry("guidance")
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            set_in(t.as_table_mut().expect("guidance table"), g, &value);
        }
        ("guidance" | "options", Some(f)) => {
            let t = root
                .entry(head)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            set_in(t.as_table_mut().expect("nested table"), f, &value);
        }
        ("vehicle" | "obstacle", Some(f)) => {
            let list = if head == "vehicle" {
                "vehicles"
            } else {
                "obstacles"
            };
            let items = root.get_mut(list).and_then(|v| v.as_array_mut());
            let Some(items) = items.filter(|a| !a.is_empty()) else {
                return Err(bad(format!("scenario has no {list}")));
            };
            for item in items.iter_mut() {
                let item = item.as_table_mut().expect("array of tables");
                if head == "vehicle" && VEHICLE_PARAM_KEYS.contains(&f) {
                    let params = item
                        .get_mut("params")
                        .and_then(|p| p.as_table_mut())
                        .expect("params table");
                    set_in(params, f, &value);
                } else {
                    set_in(item, f, &value);
                }
            }
        }
        _ => return Err(bad("unknown key".into())),
    }
    let updated: ScenarioConfig = toml::Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
    updated.validate().map_err(|e| bad(e.to_string()))?;
    *cfg = updated;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_column_counts_from_one() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin("nosuch"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn nonparallel_depends_on_seed() {
        let a = builtin_with_seed("nonparallel_4", 1).unwrap();
        let b = builtin_with_seed("nonparallel_4", 1).unwrap();
        let c = builtin_with_seed("nonparallel_4", 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn overrides() {
        let mut cfg = builtin("pursuer_demo").unwrap();
        apply_override(&mut cfg, "obstacle.v_o_max", "12").unwrap();
        assert_eq!(cfg.obstacles[0].v_o_max, 12.0);
        apply_override(&mut cfg, "k2", "3.5").unwrap();
        assert_eq!(cfg.guidance.k2, 3.5);
        apply_override(&mut cfg, "vehicle.v_m", "7").unwrap();
        assert_eq!(cfg.vehicles[0].params.v_m, 7.0);
        apply_override(&mut cfg, "options.selection_policy", "nearest_within").unwrap();
        apply_override(&mut cfg, "t_end", "5").unwrap();
        assert_eq!(cfg.t_end, 5.0);
        let before = cfg.clone();
        for (k, v) in [
            ("nosuch", "1"),
            ("guidance.k9", "1"),
            ("obstacle.colour", "1"),
            ("k2", "fast"),
            ("dt", "-1"),
        ] {
            assert!(apply_override(&mut cfg, k, v).is_err(), "{k}={v}");
        }
        assert_eq!(cfg, before);
        let mut swarm = builtin("super_41").unwrap();
        assert!(apply_override(&mut swarm, "obstacle.r_o", "1").is_err());
    }
}
