//! Vehicle and obstacle models, exact zero-order-hold stepping and the
//! filtered-position error quantities.
//!
//! The multicopter follows `p' = v`, `v' = -l (v - v_c)` with the command
//! clamped to the speed limit. Over a step with the command held constant
//! the solution is exponential and is evaluated in closed form, so the
//! filtered position `xi = p + v / l` advances by exactly `v_c * dt`.

use serde::{Deserialize, Serialize};

use crate::error::{config, degenerate, invalid, Result};
use crate::mathcore::{saturate_unchecked, Vec2};

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleParams {
    /// Maneuver constant of the velocity loop (1/s).
    pub l: f64,
    /// Speed limit (m/s).
    pub v_m: f64,
    /// Safety radius (m).
    pub r_s: f64,
    /// Avoidance radius (m).
    pub r_a: f64,
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.l, self.v_m, self.r_s, self.r_a]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(config("vehicle parameters must be finite"));
        }
        if self.l <= 0.0 {
            return Err(config(format!("l > 0 violated (l = {})", self.l)));
        }
        if self.v_m <= 0.0 {
            return Err(config(format!("v_m > 0 violated (v_m = {})", self.v_m)));
        }
        if self.r_s <= 0.0 {
            return Err(config(format!("r_s > 0 violated (r_s = {})", self.r_s)));
        }
        if self.r_a <= self.r_s {
            return Err(config(format!(
                "r_a > r_s violated (r_a = {}, r_s = {})",
                self.r_a, self.r_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MulticopterState {
    pub p: Vec2,
    pub v: Vec2,
}

impl MulticopterState {
    pub fn new(p: Vec2, v: Vec2) -> Self {
        Self { p, v }
    }

    /// Filtered position `p + v / l`.
    pub fn xi(&self, l: f64) -> Vec2 {
        self.p + self.v / l
    }
}

/// Piece of a scripted obstacle command: `a_o` is held from time `t` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    pub t: f64,
    pub a_o: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleBehavior {
    /// Moves with its initial velocity forever.
    ConstantVelocity,
    /// Filtered-position command `a_o` follows a piecewise-constant schedule.
    Scripted { schedule: Vec<ScriptSegment> },
    /// Steers its filtered position toward the vehicle's, closing at `eps1` m/s.
    Pursuer { eps1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub p_o: Vec2,
    pub v_o: Vec2,
    pub r_o: f64,
    pub behavior: ObstacleBehavior,
    /// Declared bound on the obstacle's speed (m/s).
    pub v_o_max: f64,
}

impl Obstacle {
    pub fn constant_velocity(p_o: Vec2, v_o: Vec2, r_o: f64) -> Self {
        Self {
            p_o,
            v_o,
            r_o,
            behavior: ObstacleBehavior::ConstantVelocity,
            v_o_max: v_o.norm(),
        }
    }

    pub fn xi(&self, l: f64) -> Vec2 {
        self.p_o + self.v_o / l
    }

    /// Upper bound on the speed of the obstacle's filtered position, the
    /// quantity that must stay below the vehicle's `v_m`.
    pub fn speed_bound(&self) -> f64 {
        match &self.behavior {
            ObstacleBehavior::ConstantVelocity => self.v_o.norm(),
            ObstacleBehavior::Scripted { .. } => self.v_o_max,
            ObstacleBehavior::Pursuer { eps1 } => self.v_o_max + eps1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_o.is_finite() && self.v_o.is_finite()) {
            return Err(config("obstacle state must be finite"));
        }
        if !(self.r_o > 0.0 && self.r_o.is_finite()) {
            return Err(config(format!("r_o > 0 violated (r_o = {})", self.r_o)));
        }
        if !(self.v_o_max >= 0.0 && self.v_o_max.is_finite()) {
            return Err(config(format!(
                "v_o_max >= 0 violated (v_o_max = {})",
                self.v_o_max
            )));
        }
        match &self.behavior {
            ObstacleBehavior::ConstantVelocity | ObstacleBehavior::Scripted { .. } => {
                // small slack so a bound written at 9 digits still accepts its velocity
                if self.v_o.norm() > self.v_o_max * (1.0 + 1e-9) + 1e-12 {
                    return Err(config(format!(
                        "|v_o| <= v_o_max violated (|v_o| = {}, v_o_max = {})",
                        self.v_o.norm(),
                        self.v_o_max
                    )));
                }
                if let ObstacleBehavior::Scripted { schedule } = &self.behavior {
                    if schedule
                        .iter()
                        .any(|s| !(s.t.is_finite() && s.a_o.is_finite()))
                    {
                        return Err(config("scripted schedule must be finite"));
                    }
                    if schedule.windows(2).any(|w| w[1].t <= w[0].t) {
                        return Err(config("scripted schedule times must increase"));
                    }
                }
            }
            ObstacleBehavior::Pursuer { eps1 } => {
                if !(*eps1 > 0.0 && eps1.is_finite()) {
                    return Err(config(format!("pursuer eps1 > 0 violated (eps1 = {eps1})")));
                }
            }
        }
        Ok(())
    }
}

/// What an obstacle can observe when it is stepped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleEnv {
    /// Time at the start of the step (s).
    pub t: f64,
    /// Maneuver constant used for the obstacle's own filtered position.
    pub l: f64,
    /// Filtered position of the tracked vehicle.
    pub target_xi: Vec2,
    /// Filtered-position velocity of the tracked vehicle over this step.
    pub target_xi_dot: Vec2,
}

/// Filtered error quantities between the vehicle, one obstacle and the waypoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredErrors {
    pub xi: Vec2,
    pub xi_o_err: Vec2,
    pub xi_wp_err: Vec2,
    pub p_o_err: Vec2,
    pub v_o_err: Vec2,
    pub p_wp_err: Vec2,
}

/// Closed-form solution of `p' = v, v' = -l (v - u)` over `dt` with `u` held.
#[inline]
fn zoh(p: Vec2, v: Vec2, u: Vec2, l: f64, dt: f64) -> (Vec2, Vec2) {
    let decay = (-l * dt).exp();
    // 1 - e^{-l dt} without cancellation for small l dt
    let gain = -(-l * dt).exp_m1();
    let dv = v - u;
    (p + u * dt + dv * (gain / l), u + dv * decay)
}

/// Advances the multicopter by one step with the command held.
///
/// The command is clamped to `v_m` before use.
pub fn step_multicopter(
    state: &MulticopterState,
    v_c: Vec2,
    params: &VehicleParams,
    dt: f64,
) -> Result<MulticopterState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    if !v_c.is_finite() {
        return Err(invalid(format!("velocity command {v_c} is not finite")));
    }
    let u = saturate_unchecked(v_c, params.v_m);
    let (p, v) = zoh(state.p, state.v, u, params.l, dt);
    Ok(MulticopterState { p, v })
}

/// Classical RK4 over `substeps` sub-intervals, kept as a cross-check of
/// [`step_multicopter`].
pub fn step_multicopter_rk4(
    state: &MulticopterState,
    v_c: Vec2,
    params: &VehicleParams,
    dt: f64,
    substeps: usize,
) -> Result<MulticopterState> {
    if !(dt > 0.0 && dt.is_finite()) || substeps == 0 {
        return Err(invalid("dt must be positive and substeps nonzero"));
    }
    let u = saturate_unchecked(v_c, params.v_m);
    let l = params.l;
    let h = dt / substeps as f64;
    let f = |_p: Vec2, v: Vec2| (v, (v - u) * -l);
    let (mut p, mut v) = (state.p, state.v);
    for _ in 0..substeps {
        let (k1p, k1v) = f(p, v);
        let (k2p, k2v) = f(p + k1p * (h / 2.0), v + k1v * (h / 2.0));
        let (k3p, k3v) = f(p + k2p * (h / 2.0), v + k2v * (h / 2.0));
        let (k4p, k4v) = f(p + k3p * h, v + k3v * h);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    }
    Ok(MulticopterState { p, v })
}

/// Filtered-position velocity command the obstacle applies over the next step.
pub fn obstacle_command(ob: &Obstacle, env: &ObstacleEnv) -> Result<Vec2> {
    match &ob.behavior {
        ObstacleBehavior::ConstantVelocity => Ok(ob.v_o),
        ObstacleBehavior::Scripted { schedule } => {
            let a = schedule
                .iter()
                .take_while(|s| s.t <= env.t)
                .last()
                .map_or(ob.v_o, |s| s.a_o);
            Ok(saturate_unchecked(a, ob.v_o_max))
        }
        ObstacleBehavior::Pursuer { eps1 } => {
            let gap = env.target_xi - ob.xi(env.l);
            let dir = gap
                .normalized()
                .ok_or_else(|| degenerate("pursuer filtered position coincides with its target"))?;
            // matches the target's motion up to its own speed, plus a closing term
            Ok(saturate_unchecked(env.target_xi_dot, ob.v_o_max) + dir * *eps1)
        }
    }
}

/// Advances an obstacle by one step.
///
/// Constant-velocity obstacles translate; scripted obstacles and pursuers
/// hold their filtered-position command over the step and recover `p_o`,
/// `v_o` through the same exponential update as the vehicle.
pub fn step_obstacle(ob: &Obstacle, env: &ObstacleEnv, dt: f64) -> Result<Obstacle> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let mut next = ob.clone();
    match ob.behavior {
        ObstacleBehavior::ConstantVelocity => {
            next.p_o = ob.p_o + ob.v_o * dt;
        }
        ObstacleBehavior::Scripted { .. } | ObstacleBehavior::Pursuer { .. } => {
            if !(env.l > 0.0) {
                return Err(invalid(format!("l must be positive, got {}", env.l)));
            }
            let a = obstacle_command(ob, env)?;
            let (p, v) = zoh(ob.p_o, ob.v_o, a, env.l, dt);
            next.p_o = p;
            next.v_o = v;
        }
    }
    Ok(next)
}

pub fn filtered_position(p: Vec2, v: Vec2, l: f64) -> Result<Vec2> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("l must be positive, got {l}")));
    }
    Ok(p + v / l)
}

pub fn compute_errors(
    m: &MulticopterState,
    ob: &Obstacle,
    wp: Vec2,
    l: f64,
) -> Result<FilteredErrors> {
    let xi = filtered_position(m.p, m.v, l)?;
    let p_o_err = m.p - ob.p_o;
    let v_o_err = m.v - ob.v_o;
    Ok(FilteredErrors {
        xi,
        xi_o_err: p_o_err + v_o_err / l,
        xi_wp_err: xi - wp,
        p_o_err,
        v_o_err,
        p_wp_err: m.p - wp,
    })
}

/// Bound `(v_m + v_o_max) / l` on the velocity part of the filtered error.
pub fn velocity_margin_radius(v_m: f64, v_o_max: f64, l: f64) -> Result<f64> {
    // a static obstacle (v_o_max = 0) is allowed
    if !(v_m > 0.0 && l > 0.0 && v_o_max >= 0.0) {
        return Err(invalid(format!(
            "velocity margin needs v_m > 0, l > 0, v_o_max >= 0 (got {v_m}, {l}, {v_o_max})"
        )));
    }
    Ok((v_m + v_o_max) / l)
}

/// Filtered separation above which physical separation `r` is guaranteed.
pub fn filtered_separation_threshold(r: f64, r_v: f64) -> f64 {
    r.hypot(r_v)
}

/// Angle in `[0, pi]` between the filtered error and the obstacle velocity.
pub fn approach_angle(xi_o_err: Vec2, v_o: Vec2) -> Result<f64> {
    let n1 = xi_o_err.norm();
    let n2 = v_o.norm();
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(degenerate("approach angle needs two nonzero vectors"));
    }
    Ok((xi_o_err.dot(v_o) / (n1 * n2)).clamp(-1.0, 1.0).acos())
}
