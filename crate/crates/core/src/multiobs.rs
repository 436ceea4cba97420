//! Multiple obstacles: combining parallel groups, picking the active ones
//! and checking a scenario against the standing assumptions.

use std::fmt;

use serde::Serialize;

use crate::dynamics::{Obstacle, ObstacleBehavior};
use crate::error::{invalid, Error, Result};
use crate::mathcore::{min_enclosing_disc, Disc, Vec2};
use crate::sim::{ScenarioConfig, SelectionPolicy};

/// Largest pairwise velocity difference within a set of obstacles.
fn velocity_spread(obstacles: &[Obstacle]) -> f64 {
    let mut spread = 0.0f64;
    for (i, a) in obstacles.iter().enumerate() {
        for b in &obstacles[i + 1..] {
            spread = spread.max(a.v_o.distance(b.v_o));
        }
    }
    spread
}

/// Single obstacle standing in for a group moving with one velocity.
pub fn combine_parallel(obstacles: &[Obstacle], vel_tol: f64) -> Result<Obstacle> {
    if obstacles.is_empty() {
        return Err(invalid("cannot combine an empty obstacle group"));
    }
    if obstacles.len() == 1 {
        return Ok(obstacles[0].clone());
    }
    let spread = velocity_spread(obstacles);
    if spread > vel_tol {
        return Err(Error::NotParallel {
            spread,
            tol: vel_tol,
        });
    }
    let discs: Vec<Disc> = obstacles
        .iter()
        .map(|o| Disc::new(o.p_o, o.r_o))
        .collect::<Result<_>>()?;
    let mec = min_enclosing_disc(&discs)?;
    let n = obstacles.len() as f64;
    let v = obstacles.iter().fold(Vec2::ZERO, |acc, o| acc + o.v_o) / n;
    Ok(Obstacle {
        p_o: mec.center,
        v_o: v,
        r_o: mec.radius,
        behavior: ObstacleBehavior::ConstantVelocity,
        v_o_max: v.norm(),
    })
}

/// Partition obstacle indices into groups sharing a velocity.
///
/// Greedy in index order: an obstacle joins the first group whose leader
/// moves within `vel_tol` of it.
pub fn group_parallel(obstacles: &[Obstacle], vel_tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, ob) in obstacles.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|g| obstacles[g[0]].v_o.distance(ob.v_o) <= vel_tol)
        {
            Some(g) => g.push(k),
            None => groups.push(vec![k]),
        }
    }
    groups
}

/// Obstacles whose filtered center distance is inside the trigger `r_a + r_o`.
///
/// Returns `(xi_o_err, r_o)` pairs in input order. Under `NearestWithin` at
/// most one is returned, the lowest index winning ties.
pub fn select_active(
    xi: Vec2,
    obstacles: &[Obstacle],
    l: f64,
    r_a: f64,
    policy: SelectionPolicy,
) -> Vec<(Vec2, f64)> {
    let inside = obstacles.iter().filter_map(|o| {
        let e = xi - o.xi(l);
        (e.norm() < r_a + o.r_o).then_some((e, o.r_o))
    });
    match policy {
        SelectionPolicy::AllWithin => inside.collect(),
        SelectionPolicy::NearestWithin => inside
            .fold(None::<(Vec2, f64)>, |best, cand| match best {
                Some(b) if b.0.norm() <= cand.0.norm() => Some(b),
                _ => Some(cand),
            })
            .into_iter()
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObstacleCheck {
    pub obstacle: usize,
    pub pass: bool,
}

/// Check between one vehicle and one obstacle group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleCheck {
    pub vehicle: usize,
    /// Obstacle indices of the group (a single index unless combined).
    pub obstacles: Vec<usize>,
    pub pass: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    /// Obstacle indices of the first group.
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub pass: bool,
    /// Center distance minus the required spacing at t = 0 (m).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSpeedCheck {
    pub vehicle: usize,
    pub pass: bool,
    pub margin: f64,
}

/// Outcome of every assumption check. Failing entries carry their indices
/// and numeric margins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Obstacle velocity is constant.
    pub a1_constant_velocity: Vec<ObstacleCheck>,
    /// Vehicles start outside every safety area, groups taken as one disc.
    pub a2_initial_separation: Vec<VehicleCheck>,
    /// Vehicles start within their speed limit.
    pub a2_initial_speed: Vec<InitialSpeedCheck>,
    /// Obstacle groups are far enough apart that at most one is in range.
    pub a2pp_pairwise: Vec<PairCheck>,
    /// Waypoints keep clear of static obstacles.
    pub a3_waypoint_clearance: Vec<VehicleCheck>,
    /// Vehicles outrun every obstacle (`v_m` above the obstacle speed bound).
    pub speed: Vec<VehicleCheck>,
    pub warnings: Vec<String>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.a1_constant_velocity.iter().all(|c| c.pass)
            && self.a2_initial_separation.iter().all(|c| c.pass)
            && self.a2_initial_speed.iter().all(|c| c.pass)
            && self.a2pp_pairwise.iter().all(|c| c.pass)
            && self.a3_waypoint_clearance.iter().all(|c| c.pass)
            && self.speed.iter().all(|c| c.pass)
    }

    pub fn speed_passed(&self) -> bool {
        self.speed.iter().all(|c| c.pass)
    }

    /// Failing checks only, one line each.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.a1_constant_velocity.iter().filter(|c| !c.pass) {
            out.push(format!(
                "a1 obstacle {}: velocity is not constant",
                c.obstacle
            ));
        }
        for c in self.a2_initial_separation.iter().filter(|c| !c.pass) {
            out.push(format!(
                "a2 vehicle {} vs obstacles {:?}: margin {:.6} m",
                c.vehicle, c.obstacles, c.margin
            ));
        }
        for c in self.a2_initial_speed.iter().filter(|c| !c.pass) {
            out.push(format!(
                "a2 vehicle {}: speed margin {:.6} m/s",
                c.vehicle, c.margin
            ));
        }
        for c in self.a2pp_pairwise.iter().filter(|c| !c.pass) {
            out.push(format!(
                "a2'' obstacles {:?} vs {:?}: margin {:.6} m",
                c.first, c.second, c.margin
            ));
        }
        for c in self.a3_waypoint_clearance.iter().filter(|c| !c.pass) {
            out.push(format!(
                "a3 vehicle {} vs obstacle {:?}: margin {:.6} m",
                c.vehicle, c.obstacles, c.margin
            ));
        }
        for c in self.speed.iter().filter(|c| !c.pass) {
            out.push(format!(
                "speed vehicle {} vs obstacle {:?}: margin {:.6} m/s",
                c.vehicle, c.obstacles, c.margin
            ));
        }
        out
    }
}

fn summary_line<T>(
    f: &mut fmt::Formatter<'_>,
    label: &str,
    items: &[T],
    pass: impl Fn(&T) -> bool,
    margin: impl Fn(&T) -> Option<f64>,
) -> fmt::Result {
    let failed = items.iter().filter(|c| !pass(c)).count();
    let worst = items
        .iter()
        .filter_map(&margin)
        .fold(None::<f64>, |m, x| Some(m.map_or(x, |m| m.min(x))));
    let status = if failed == 0 { "pass" } else { "FAIL" };
    write!(
        f,
        "  {label:<24} {status:<5} checks={:<4} failed={failed}",
        items.len()
    )?;
    if let Some(w) = worst {
        write!(f, " worst_margin={w:.6}")?;
    }
    writeln!(f)
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumptions:")?;
        summary_line(
            f,
            "a1_constant_velocity",
            &self.a1_constant_velocity,
            |c| c.pass,
            |_| None,
        )?;
        summary_line(
            f,
            "a2_initial_separation",
            &self.a2_initial_separation,
            |c| c.pass,
            |c| Some(c.margin),
        )?;
        summary_line(
            f,
            "a2_initial_speed",
            &self.a2_initial_speed,
            |c| c.pass,
            |c| Some(c.margin),
        )?;
        summary_line(
            f,
            "a2pp_pairwise",
            &self.a2pp_pairwise,
            |c| c.pass,
            |c| Some(c.margin),
        )?;
        summary_line(
            f,
            "a3_waypoint_clearance",
            &self.a3_waypoint_clearance,
            |c| c.pass,
            |c| Some(c.margin),
        )?;
        summary_line(f, "speed", &self.speed, |c| c.pass, |c| Some(c.margin))?;
        for line in self.failures() {
            writeln!(f, "  fail: {line}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Minimum of `|d0 + dv t|` over `t` in `[0, horizon]`, with its time.
pub(crate) fn closest_approach(d0: Vec2, dv: Vec2, horizon: f64) -> (f64, f64) {
    let vv = dv.norm_squared();
    let t = if vv > 0.0 {
        (-d0.dot(dv) / vv).clamp(0.0, horizon)
    } else {
        0.0
    };
    ((d0 + dv * t).norm(), t)
}

/// Checks a scenario against the standing assumptions. Never fails; every
/// violation is reported with its margin.
pub fn validate(scenario: &ScenarioConfig) -> AssumptionReport {
    let obs = &scenario.obstacles;
    let mut warnings = Vec::new();

    let a1_constant_velocity = obs
        .iter()
        .enumerate()
        .map(|(k, o)| ObstacleCheck {
            obstacle: k,
            pass: matches!(o.behavior, ObstacleBehavior::ConstantVelocity),
        })
        .collect();

    let groups = group_parallel(obs, scenario.options.vel_tol);
    let group_discs: Vec<Option<Obstacle>> = groups
        .iter()
        .map(|g| {
            let members: Vec<Obstacle> = g.iter().map(|&k| obs[k].clone()).collect();
            combine_parallel(&members, scenario.options.vel_tol).ok()
        })
        .collect();

    let mut a2_initial_separation = Vec::new();
    let mut a2_initial_speed = Vec::new();
    let mut a3_waypoint_clearance = Vec::new();
    let mut speed = Vec::new();
    for (i, v) in scenario.vehicles.iter().enumerate() {
        let vp = &v.params;
        let margin = vp.v_m - v.initial.v.norm();
        a2_initial_speed.push(InitialSpeedCheck {
            vehicle: i,
            pass: margin >= 0.0,
            margin,
        });
        let xi = v.initial.xi(vp.l);
        for (g, disc) in groups.iter().zip(&group_discs) {
            let Some(c) = disc else {
                warnings.push(format!("obstacle group {g:?} could not be combined"));
                continue;
            };
            let margin = (xi - c.xi(vp.l)).norm() - (vp.r_s + c.r_o);
            a2_initial_separation.push(VehicleCheck {
                vehicle: i,
                obstacles: g.clone(),
                pass: margin > 0.0,
                margin,
            });
        }
        for (k, o) in obs.iter().enumerate() {
            let bound = o.speed_bound();
            let margin = vp.v_m - bound;
            speed.push(VehicleCheck {
                vehicle: i,
                obstacles: vec![k],
                pass: margin > 0.0,
                margin,
            });
            let is_static =
                matches!(o.behavior, ObstacleBehavior::ConstantVelocity) && o.v_o == Vec2::ZERO;
            if is_static {
                let margin = v.waypoint.distance(o.p_o) - (vp.r_a + o.r_o);
                a3_waypoint_clearance.push(VehicleCheck {
                    vehicle: i,
                    obstacles: vec![k],
                    pass: margin >= 0.0,
                    margin,
                });
            }
        }
    }

    // spacing between groups uses the widest avoidance radius in the fleet
    let r_a = scenario
        .vehicles
        .iter()
        .map(|v| v.params.r_a)
        .fold(0.0, f64::max);
    let mut a2pp_pairwise = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let (Some(da), Some(db)) = (&group_discs[a], &group_discs[b]) else {
                continue;
            };
            let need = 2.0 * r_a + da.r_o + db.r_o;
            let d0 = da.p_o - db.p_o;
            let margin = d0.norm() - need;
            a2pp_pairwise.push(PairCheck {
                first: groups[a].clone(),
                second: groups[b].clone(),
                pass: margin >= 0.0,
                margin,
            });
            let both_constant = [&groups[a], &groups[b]].iter().all(|g| {
                g.iter()
                    .all(|&k| matches!(obs[k].behavior, ObstacleBehavior::ConstantVelocity))
            });
            if both_constant && margin >= 0.0 {
                let (dmin, t) = closest_approach(d0, da.v_o - db.v_o, scenario.t_end);
                if dmin < need {
                    warnings.push(format!(
                        "obstacles {:?} and {:?} come within {:.3} m (< {:.3} m) at t = {:.2} s",
                        groups[a], groups[b], dmin, need, t
                    ));
                }
            }
        }
    }

    if scenario.options.peers_as_obstacles {
        for i in 0..scenario.vehicles.len() {
            for j in i + 1..scenario.vehicles.len() {
                let (vi, vj) = (&scenario.vehicles[i], &scenario.vehicles[j]);
                let d = vi
                    .initial
                    .xi(vi.params.l)
                    .distance(vj.initial.xi(vj.params.l));
                let need = vi.params.r_s.max(vj.params.r_s) + scenario.options.peer_radius;
                if d <= need {
                    warnings.push(format!(
                        "vehicles {i} and {j} start {d:.3} m apart, inside the {need:.3} m separation"
                    ));
                }
            }
        }
    }

    AssumptionReport {
        a1_constant_velocity,
        a2_initial_separation,
        a2_initial_speed,
        a2pp_pairwise,
        a3_waypoint_clearance,
        speed,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(x: f64, y: f64, r: f64, v: Vec2) -> Obstacle {
        Obstacle::constant_velocity(Vec2::new(x, y), v, r)
    }

    #[test]
    fn combine_single_is_identity() {
        let o = cv(1.0, 2.0, 3.0, Vec2::new(1.0, 0.0));
        assert_eq!(combine_parallel(std::slice::from_ref(&o), 1e-6).unwrap(), o);
    }

    #[test]
    fn combine_symmetric_pair() {
        let v = Vec2::new(0.0, -8.0);
        let c = combine_parallel(&[cv(-1.0, 0.0, 1.0, v), cv(1.0, 0.0, 1.0, v)], 1e-6).unwrap();
        assert!(c.p_o.norm() < 1e-12);
        assert!((c.r_o - 2.0).abs() < 1e-12);
        assert_eq!(c.v_o, v);
    }

    #[test]
    fn combine_rejects_non_parallel() {
        let r = combine_parallel(
            &[
                cv(0.0, 0.0, 1.0, Vec2::new(1.0, 0.0)),
                cv(5.0, 0.0, 1.0, Vec2::new(0.0, 1.0)),
            ],
            1e-6,
        );
        assert!(matches!(r, Err(Error::NotParallel { .. })));
        assert!(combine_parallel(&[], 1e-6).is_err());
    }

    #[test]
    fn grouping() {
        let a = Vec2::new(1.0, 0.0);
        let b = Vec2::new(0.0, 1.0);
        let obs = [
            cv(0.0, 0.0, 1.0, a),
            cv(9.0, 0.0, 1.0, b),
            cv(3.0, 0.0, 1.0, a),
        ];
        assert_eq!(group_parallel(&obs, 1e-6), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn selection_policies() {
        let obs = [
            cv(-16.0, 0.0, 10.0, Vec2::ZERO),
            cv(500.0, 0.0, 10.0, Vec2::ZERO),
            cv(15.0, 0.0, 10.0, Vec2::ZERO),
        ];
        let all = select_active(Vec2::ZERO, &obs, 5.0, 7.5, SelectionPolicy::AllWithin);
        assert_eq!(all.len(), 2);
        let near = select_active(Vec2::ZERO, &obs, 5.0, 7.5, SelectionPolicy::NearestWithin);
        assert_eq!(near, vec![(Vec2::new(-15.0, 0.0), 10.0)]);
        let none = select_active(
            Vec2::new(0.0, 1e3),
            &obs,
            5.0,
            7.5,
            SelectionPolicy::AllWithin,
        );
        assert!(none.is_empty());
    }

    #[test]
    fn closest_approach_cases() {
        let (d, t) = closest_approach(Vec2::new(-10.0, 3.0), Vec2::new(1.0, 0.0), 100.0);
        assert!((d - 3.0).abs() < 1e-12 && (t - 10.0).abs() < 1e-12);
        let (d, t) = closest_approach(Vec2::new(10.0, 3.0), Vec2::new(1.0, 0.0), 100.0);
        assert_eq!(t, 0.0);
        assert!((d - 109f64.sqrt()).abs() < 1e-12);
    }
}
