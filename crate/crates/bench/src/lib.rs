//! Shared fixtures for the benchmarks.

use apfguard::scenario_io::builtin;
use apfguard::ScenarioConfig;

/// A built-in scenario cut off at `t_end`.
pub fn truncated(name: &str, t_end: f64) -> ScenarioConfig {
    let mut cfg = builtin(name).expect("built-in scenario");
    cfg.t_end = t_end;
    cfg
}

/// Filtered distances spread over the repulsion window of a 10 m obstacle
/// (r_s = 5, r_a = 7.5, gamma = 1.2), deep zone included.
pub fn window_distances(n: usize) -> Vec<f64> {
    (1..=n).map(|k| 17.5 * k as f64 / n as f64).collect()
}
