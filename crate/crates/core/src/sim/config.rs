use serde::{Deserialize, Serialize};

use crate::dynamics::{MulticopterState, Obstacle, VehicleParams, DEFAULT_DT};
use crate::error::{config, Result};
use crate::guidance::{repulsion_window, GuidanceParams};
use crate::mathcore::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub params: VehicleParams,
    pub initial: MulticopterState,
    pub waypoint: Vec2,
}

/// Which obstacles inside the avoidance trigger feed the command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    /// Sum the repulsion of every triggered obstacle.
    #[default]
    AllWithin,
    /// Only the triggered obstacle with the smallest filtered distance.
    NearestWithin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Replace each group of same-velocity obstacles by its enclosing disc.
    #[serde(default)]
    pub combine_parallel: bool,
    #[serde(default)]
    pub selection_policy: SelectionPolicy,
    /// Every other vehicle is avoided as an obstacle at its filtered position.
    #[serde(default)]
    pub peers_as_obstacles: bool,
    /// Radius assigned to peers when they are treated as obstacles (m).
    #[serde(default)]
    pub peer_radius: f64,
    /// Velocity tolerance for grouping parallel obstacles (m/s).
    #[serde(default = "default_vel_tol")]
    pub vel_tol: f64,
    /// Waypoint distance counted as arrival (m).
    #[serde(default = "default_arrival_tol")]
    pub arrival_tol: f64,
    /// Consecutive steps inside `arrival_tol` required for arrival.
    #[serde(default = "default_arrival_hold")]
    pub arrival_hold: usize,
    /// Length of the trailing window inspected for deadlock (s).
    #[serde(default = "default_deadlock_window")]
    pub deadlock_window: f64,
}

fn default_vel_tol() -> f64 {
    1e-6
}
fn default_arrival_tol() -> f64 {
    0.1
}
fn default_arrival_hold() -> usize {
    100
}
fn default_deadlock_window() -> f64 {
    5.0
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            combine_parallel: false,
            selection_policy: SelectionPolicy::AllWithin,
            peers_as_obstacles: false,
            peer_radius: 0.0,
            vel_tol: default_vel_tol(),
            arrival_tol: default_arrival_tol(),
            arrival_hold: default_arrival_hold(),
            deadlock_window: default_deadlock_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Integration step (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    #[serde(default)]
    pub guidance: GuidanceParams,
    #[serde(default)]
    pub options: SimOptions,
    pub vehicles: Vec<VehicleConfig>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl ScenarioConfig {
    /// Number of integration steps covering `[0, t_end]`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Structural checks; violations name the broken invariant.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config(format!("dt > 0 violated (dt = {})", self.dt)));
        }
        if !(self.t_end > self.dt && self.t_end.is_finite()) {
            return Err(config(format!(
                "t_end > dt violated (t_end = {}, dt = {})",
                self.t_end, self.dt
            )));
        }
        if self.vehicles.is_empty() {
            return Err(config("at least one vehicle is required"));
        }
        self.guidance.validate()?;
        let o = &self.options;
        if !(o.peer_radius >= 0.0 && o.peer_radius.is_finite()) {
            return Err(config(format!(
                "peer_radius >= 0 violated ({})",
                o.peer_radius
            )));
        }
        if !(o.vel_tol >= 0.0 && o.vel_tol.is_finite()) {
            return Err(config(format!("vel_tol >= 0 violated ({})", o.vel_tol)));
        }
        if !(o.arrival_tol > 0.0 && o.arrival_tol.is_finite()) {
            return Err(config(format!(
                "arrival_tol > 0 violated ({})",
                o.arrival_tol
            )));
        }
        if o.arrival_hold == 0 {
            return Err(config("arrival_hold > 0 violated"));
        }
        if !(o.deadlock_window > 0.0 && o.deadlock_window.is_finite()) {
            return Err(config(format!(
                "deadlock_window > 0 violated ({})",
                o.deadlock_window
            )));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            v.params
                .validate()
                .map_err(|e| config(format!("vehicle {i}: {}", strip(&e))))?;
            if !(v.initial.p.is_finite() && v.initial.v.is_finite() && v.waypoint.is_finite()) {
                return Err(config(format!(
                    "vehicle {i}: state and waypoint must be finite"
                )));
            }
            // the window width does not depend on r_o
            repulsion_window(0.0, &self.guidance, v.params.r_s, v.params.r_a)
                .map_err(|e| config(format!("vehicle {i}: {}", strip(&e))))?;
        }
        for (k, ob) in self.obstacles.iter().enumerate() {
            ob.validate()
                .map_err(|e| config(format!("obstacle {k}: {}", strip(&e))))?;
        }
        Ok(())
    }
}

fn strip(e: &crate::Error) -> String {
    match e {
        crate::Error::InvalidConfiguration(m) | crate::Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}
