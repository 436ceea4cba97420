//! Attractive and repulsive potentials and the saturated velocity command.
//!
//! Distances to an obstacle are measured center to center between filtered
//! positions. The repulsive potential is active on the window
//! `[gamma * r_s + r_o, r_a + r_o)`: it blows up like `k2 / (eps * z)` just
//! inside the inner edge and fades to zero with a cubic bump at the outer
//! edge.

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleParams;
use crate::error::{config, degenerate, invalid, Result};
use crate::mathcore::{
    bump_deriv_unchecked, bump_unchecked, check_eps_s, saturate_unchecked,
    smooth_sat_deriv_unchecked, smooth_sat_unchecked, Vec2,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceParams {
    /// Attractive gain (1/s).
    pub k1: f64,
    /// Repulsive strength.
    pub k2: f64,
    /// Barrier sharpness.
    pub eps: f64,
    /// Rounding of the smooth saturation.
    pub eps_s: f64,
    /// Inflation of the safety radius inside the barrier.
    pub gamma: f64,
}

impl Default for GuidanceParams {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 10.0,
            eps: 1e-3,
            eps_s: 0.1,
            gamma: 1.2,
        }
    }
}

impl GuidanceParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("eps", self.eps),
            ("eps_s", self.eps_s),
            ("gamma", self.gamma),
        ];
        for (name, x) in named {
            if !x.is_finite() {
                return Err(config(format!("{name} must be finite")));
            }
        }
        if self.k1 <= 0.0 {
            return Err(config(format!("k1 > 0 violated (k1 = {})", self.k1)));
        }
        if self.k2 <= 0.0 {
            return Err(config(format!("k2 > 0 violated (k2 = {})", self.k2)));
        }
        if self.eps <= 0.0 {
            return Err(config(format!("eps > 0 violated (eps = {})", self.eps)));
        }
        if self.gamma <= 1.0 {
            return Err(config(format!(
                "gamma > 1 violated (gamma = {})",
                self.gamma
            )));
        }
        check_eps_s(self.eps_s).map_err(|e| config(e.to_string()))
    }
}

/// Repulsion window `(inner, outer)` for an obstacle of radius `r_o`.
///
/// `inner = gamma * r_s + r_o` is where the barrier becomes steep and
/// `outer = r_a + r_o` is where the repulsion switches off.
pub fn repulsion_window(r_o: f64, gp: &GuidanceParams, r_s: f64, r_a: f64) -> Result<(f64, f64)> {
    if !(r_o >= 0.0 && r_o.is_finite()) {
        return Err(invalid(format!(
            "obstacle radius must be nonnegative, got {r_o}"
        )));
    }
    let inner = gp.gamma * r_s + r_o;
    let outer = r_a + r_o;
    if !(inner > 0.0) || inner >= outer {
        return Err(config(format!(
            "repulsion window is empty: gamma * r_s + r_o = {inner} >= r_a + r_o = {outer}"
        )));
    }
    Ok((inner, outer))
}

/// Line-integral potential of the saturated attraction.
pub fn waypoint_potential(xi_wp_err: Vec2, k1: f64, v_m: f64) -> Result<f64> {
    if !(k1 > 0.0 && v_m > 0.0) {
        return Err(invalid(format!("need k1 > 0 and v_m > 0, got {k1}, {v_m}")));
    }
    let z = xi_wp_err.norm();
    Ok(if k1 * z <= v_m {
        0.5 * k1 * z * z
    } else {
        v_m * v_m / (2.0 * k1) + v_m * (z - v_m / k1)
    })
}

/// Potential value and its derivative in `z` for a valid window.
#[inline]
fn potential_and_slope(z: f64, inner: f64, outer: f64, gp: &GuidanceParams) -> (f64, f64) {
    if z >= outer {
        return (0.0, 0.0);
    }
    let sigma = bump_unchecked(z, inner, outer);
    let dsigma = bump_deriv_unchecked(z, inner, outer);
    let x = z / inner;
    let s = smooth_sat_unchecked(x, gp.eps_s);
    let ds = smooth_sat_deriv_unchecked(x, gp.eps_s);
    // s <= x, so the second term is exactly zero below the arc and never
    // negative; the small deep-zone denominator stays accurate
    let d = gp.eps * z + inner * (x - s).max(0.0);
    let dd = gp.eps + (1.0 - ds);
    let v = gp.k2 * sigma / d;
    let dv = gp.k2 * (dsigma * d - sigma * dd) / (d * d);
    (v, dv)
}

fn checked_window(z: f64, r_o: f64, gp: &GuidanceParams, r_s: f64, r_a: f64) -> Result<(f64, f64)> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(degenerate(format!(
            "obstacle distance must be positive, got {z}"
        )));
    }
    repulsion_window(r_o, gp, r_s, r_a)
}

/// Barrier potential at filtered center distance `z`.
pub fn obstacle_potential(
    z: f64,
    r_o: f64,
    gp: &GuidanceParams,
    r_s: f64,
    r_a: f64,
) -> Result<f64> {
    let (inner, outer) = checked_window(z, r_o, gp, r_s, r_a)?;
    Ok(potential_and_slope(z, inner, outer, gp).0)
}

/// Derivative of [`obstacle_potential`] with respect to `z`.
pub fn obstacle_potential_gradient(
    z: f64,
    r_o: f64,
    gp: &GuidanceParams,
    r_s: f64,
    r_a: f64,
) -> Result<f64> {
    let (inner, outer) = checked_window(z, r_o, gp, r_s, r_a)?;
    Ok(potential_and_slope(z, inner, outer, gp).1)
}

/// Repulsive gain `-(dV_o/dz) / z`.
pub fn repulsive_gain(z: f64, r_o: f64, gp: &GuidanceParams, r_s: f64, r_a: f64) -> Result<f64> {
    let (inner, outer) = checked_window(z, r_o, gp, r_s, r_a)?;
    Ok(-potential_and_slope(z, inner, outer, gp).1 / z)
}

/// Saturated velocity command for one vehicle.
///
/// `near_obstacles` holds `(xi_o_err, r_o)` pairs; their repulsive terms are
/// summed. Obstacles outside the window contribute nothing.
pub fn velocity_command(
    xi_wp_err: Vec2,
    near_obstacles: &[(Vec2, f64)],
    gp: &GuidanceParams,
    vp: &VehicleParams,
) -> Result<Vec2> {
    if !xi_wp_err.is_finite() {
        return Err(invalid(format!("waypoint error {xi_wp_err} is not finite")));
    }
    let mut repulsion = Vec2::ZERO;
    for &(e, r_o) in near_obstacles {
        let (inner, outer) = repulsion_window(r_o, gp, vp.r_s, vp.r_a)?;
        let z = e.norm();
        if z >= outer {
            continue;
        }
        if !(z > 0.0) {
            return Err(degenerate(
                "filtered position coincides with an obstacle center",
            ));
        }
        let a_o = -potential_and_slope(z, inner, outer, gp).1 / z;
        repulsion += e * a_o;
    }
    let attraction = saturate_unchecked(xi_wp_err * gp.k1, vp.v_m);
    if repulsion == Vec2::ZERO {
        return Ok(-attraction);
    }
    let u = attraction - repulsion;
    if !u.is_finite() {
        return Err(degenerate("repulsive term overflowed"));
    }
    Ok(-saturate_unchecked(u, vp.v_m))
}
