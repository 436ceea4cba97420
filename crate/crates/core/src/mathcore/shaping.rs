//! Scalar shaping functions: vector saturation, the cubic bump and the
//! circular-arc smooth saturation, together with their derivatives.

use crate::error::{invalid, Result};
use crate::mathcore::Vec2;

/// Largest admissible rounding parameter of [`smooth_sat`]; keeps `x1 >= 0`.
pub fn smooth_sat_eps_max() -> f64 {
    let t = 67.5_f64.to_radians().tan();
    t / (t * 45.0_f64.to_radians().sin() - 1.0)
}

fn check_limit(v: Vec2, v_max: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(invalid(format!("vector {v} is not finite")));
    }
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(invalid(format!(
            "speed limit must be positive, got {v_max}"
        )));
    }
    Ok(())
}

/// Scale factor that maps `v` onto the closed ball of radius `v_max`.
///
/// `saturate(v, v_max) == kappa(v, v_max) * v`, and the factor is in `(0, 1]`.
pub fn kappa(v: Vec2, v_max: f64) -> Result<f64> {
    check_limit(v, v_max)?;
    let n = v.norm();
    Ok(if n <= v_max { 1.0 } else { v_max / n })
}

/// Direction-preserving norm clamp.
pub fn saturate(v: Vec2, v_max: f64) -> Result<Vec2> {
    check_limit(v, v_max)?;
    Ok(saturate_unchecked(v, v_max))
}

#[inline]
pub(crate) fn saturate_unchecked(v: Vec2, v_max: f64) -> Vec2 {
    let n = v.norm();
    if n <= v_max {
        v
    } else {
        v * (v_max / n)
    }
}

/// Cubic coefficients `(A, B, C, D)` of the bump on `[d1, d2]`.
fn bump_coefficients(d1: f64, d2: f64) -> (f64, f64, f64, f64) {
    let den = (d1 - d2).powi(3);
    (
        -2.0 / den,
        3.0 * (d1 + d2) / den,
        -6.0 * d1 * d2 / den,
        d2 * d2 * (3.0 * d1 - d2) / den,
    )
}

fn check_bump(x: f64, d1: f64, d2: f64) -> Result<()> {
    if !(x.is_finite() && d1.is_finite() && d2.is_finite()) {
        return Err(invalid("bump arguments must be finite"));
    }
    if d1 >= d2 {
        return Err(invalid(format!(
            "bump window must satisfy d1 < d2, got d1 = {d1}, d2 = {d2}"
        )));
    }
    Ok(())
}

/// C¹ step from 1 (for `x <= d1`) down to 0 (for `x >= d2`).
///
/// The boundary points `d1` and `d2` are evaluated on the cubic branch.
pub fn bump(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_bump(x, d1, d2)?;
    Ok(bump_unchecked(x, d1, d2))
}

#[inline]
pub(crate) fn bump_unchecked(x: f64, d1: f64, d2: f64) -> f64 {
    if x < d1 {
        1.0
    } else if x > d2 {
        0.0
    } else {
        let (a, b, c, d) = bump_coefficients(d1, d2);
        ((a * x + b) * x + c) * x + d
    }
}

pub fn bump_deriv(x: f64, d1: f64, d2: f64) -> Result<f64> {
    check_bump(x, d1, d2)?;
    Ok(bump_deriv_unchecked(x, d1, d2))
}

#[inline]
pub(crate) fn bump_deriv_unchecked(x: f64, d1: f64, d2: f64) -> f64 {
    if x < d1 || x > d2 {
        0.0
    } else {
        let (a, b, c, _) = bump_coefficients(d1, d2);
        (3.0 * a * x + 2.0 * b) * x + c
    }
}

/// Branch points `(x1, x2)` of the smooth saturation: the arc starts at
/// `x1` with unit slope and meets the plateau at `x2` with zero slope.
pub fn smooth_sat_knots(eps_s: f64) -> (f64, f64) {
    let x2 = 1.0 + eps_s / 67.5_f64.to_radians().tan();
    let x1 = x2 - 45.0_f64.to_radians().sin() * eps_s;
    (x1, x2)
}

fn check_smooth_sat(x: f64, eps_s: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid(format!(
            "smooth saturation needs a finite x >= 0, got {x}"
        )));
    }
    check_eps_s(eps_s)
}

pub(crate) fn check_eps_s(eps_s: f64) -> Result<()> {
    if !(eps_s > 0.0 && eps_s <= smooth_sat_eps_max()) {
        return Err(invalid(format!(
            "eps_s must lie in (0, {}], got {eps_s}",
            smooth_sat_eps_max()
        )));
    }
    Ok(())
}

/// Rounded approximation of `min(x, 1)` that never exceeds it.
pub fn smooth_sat(x: f64, eps_s: f64) -> Result<f64> {
    check_smooth_sat(x, eps_s)?;
    Ok(smooth_sat_unchecked(x, eps_s))
}

#[inline]
pub(crate) fn smooth_sat_unchecked(x: f64, eps_s: f64) -> f64 {
    let (x1, x2) = smooth_sat_knots(eps_s);
    if x < x1 {
        x
    } else if x > x2 {
        1.0
    } else {
        let dx = x - x2;
        (1.0 - eps_s) + (eps_s * eps_s - dx * dx).max(0.0).sqrt()
    }
}

pub fn smooth_sat_deriv(x: f64, eps_s: f64) -> Result<f64> {
    check_smooth_sat(x, eps_s)?;
    Ok(smooth_sat_deriv_unchecked(x, eps_s))
}

#[inline]
pub(crate) fn smooth_sat_deriv_unchecked(x: f64, eps_s: f64) -> f64 {
    let (x1, x2) = smooth_sat_knots(eps_s);
    if x < x1 {
        1.0
    } else if x >= x2 {
        0.0
    } else {
        let dx = x - x2;
        let root = (eps_s * eps_s - dx * dx).max(0.0).sqrt();
        // slope is 1 at x1 by construction; the clamp absorbs rounding there
        ((x2 - x) / root).min(1.0)
    }
}
