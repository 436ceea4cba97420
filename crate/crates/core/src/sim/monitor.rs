use serde::{Deserialize, Serialize};

use crate::mathcore::Vec2;

/// Declares arrival once the waypoint error has stayed within `tol` for
/// `hold` consecutive samples. The arrival time is the start of that streak.
///
/// Leaving the tolerance again withdraws the arrival, so a vehicle that is
/// later pushed off its waypoint has not arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalMonitor {
    tol: f64,
    hold: usize,
    streak: usize,
    streak_start: f64,
    arrived_at: Option<f64>,
}

impl ArrivalMonitor {
    pub fn new(tol: f64, hold: usize) -> Self {
        Self {
            tol,
            hold: hold.max(1),
            streak: 0,
            streak_start: 0.0,
            arrived_at: None,
        }
    }

    /// Feeds one sample; returns the arrival time once it is known.
    pub fn observe(&mut self, t: f64, wp_distance: f64) -> Option<f64> {
        if wp_distance <= self.tol {
            if self.streak == 0 {
                self.streak_start = t;
            }
            self.streak += 1;
            if self.streak >= self.hold {
                self.arrived_at = Some(self.streak_start);
            }
        } else {
            self.streak = 0;
            self.arrived_at = None;
        }
        self.arrived_at
    }

    pub fn arrived_at(&self) -> Option<f64> {
        self.arrived_at
    }
}

/// Whether a sampled waypoint error sequence ends with at least `hold`
/// consecutive samples within `tol`.
pub fn arrival_check(p_wp_err: &[Vec2], tol: f64, hold: usize) -> bool {
    arrival_step(p_wp_err, tol, hold).is_some()
}

/// Index of the first sample of the final qualifying streak.
pub fn arrival_step(p_wp_err: &[Vec2], tol: f64, hold: usize) -> Option<usize> {
    let mut m = ArrivalMonitor::new(tol, hold);
    let mut at = None;
    for (k, e) in p_wp_err.iter().enumerate() {
        at = m.observe(k as f64, e.norm());
    }
    at.map(|t| t as usize)
}

/// One sample of the trailing window inspected for deadlock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub t: f64,
    /// Norm of the velocity command (m/s).
    pub vc_norm: f64,
    /// Distance to the waypoint (m).
    pub wp_distance: f64,
}

/// Flags a vehicle that is stuck short of its waypoint.
///
/// Over the window, either the mean commanded speed stays below
/// `0.01 v_m`, or the vehicle gains less than `0.01 v_m` per second on its
/// waypoint while still more than `10 tol` away from it.
pub fn deadlock_check(window: &[WindowSample], v_m: f64, tol: f64, arrived: bool) -> bool {
    if arrived {
        return false;
    }
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return false;
    };
    let span = last.t - first.t;
    if !(span > 0.0) {
        return false;
    }
    let mean_vc = window.iter().map(|s| s.vc_norm).sum::<f64>() / window.len() as f64;
    if mean_vc < 0.01 * v_m {
        return true;
    }
    let progress = first.wp_distance - last.wp_distance;
    progress < 0.01 * v_m * span && last.wp_distance > 10.0 * tol
}
