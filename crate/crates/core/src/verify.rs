//! Numeric oracles for the controller's supporting results.
//!
//! Every oracle is deterministic in its seed and reports its worst
//! violation whether it passes or not. A row passes exactly when
//! `worst_violation <= tolerance`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{step_multicopter, MulticopterState, Obstacle, VehicleParams};
use crate::error::Result;
use crate::guidance::{obstacle_potential, obstacle_potential_gradient, GuidanceParams};
use crate::mathcore::{min_enclosing_disc, saturate, smooth_sat_knots, Disc, Vec2};
use crate::sim::{ScenarioConfig, SimOptions, Simulation, VehicleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub trials: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
}

impl OracleResult {
    fn new(name: &str, trials: usize, worst_violation: f64, tolerance: f64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            trials,
            worst_violation,
            tolerance,
            pass: worst_violation <= tolerance,
            seed,
        }
    }

    /// The same evidence judged against another tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.worst_violation <= tolerance;
        self
    }
}

/// Oracle groups accepted by [`run_oracle`].
pub const ORACLE_NAMES: [&str; 7] = [
    "speed_bound",
    "filtered_separation",
    "line_integral",
    "angle_convergence",
    "eigen",
    "gradient",
    "enclosing_disc",
];

pub const DEFAULT_SEED: u64 = 20_190_101;

/// Runs one oracle group with its standard trial counts.
pub fn run_oracle(name: &str, seed: u64) -> Result<Vec<OracleResult>> {
    Ok(match name {
        "speed_bound" => vec![check_speed_bound(1000, seed)],
        "filtered_separation" => check_filtered_separation(seed)?,
        "line_integral" => vec![check_line_integral(10_000, 100, seed)],
        "angle_convergence" => check_angle_convergence(100, seed)?,
        "eigen" => vec![check_eigenvalue_bound(100_000, seed)],
        "gradient" => vec![check_gradient(2000)?],
        "enclosing_disc" => vec![check_enclosing_disc(200, seed)?],
        other => {
            return Err(crate::Error::InvalidArgument(format!(
                "unknown oracle `{other}` (expected one of {})",
                ORACLE_NAMES.join(", ")
            )))
        }
    })
}

/// Every oracle group in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<OracleResult>> {
    let mut out = Vec::new();
    for name in ORACLE_NAMES {
        out.extend(run_oracle(name, seed)?);
    }
    Ok(out)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::from_angle(rng.gen_range(0.0..2.0 * PI))
}

/// Speed never exceeds `v_m` under arbitrary saturated commands.
///
/// Worst violation is `max |v| - v_m` over all steps of all trials.
pub fn check_speed_bound(trials: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let v_m = rng.gen_range(0.5..20.0);
        let params = VehicleParams {
            l: rng.gen_range(0.2..20.0),
            v_m,
            r_s: 1.0,
            r_a: 2.0,
        };
        let dt = rng.gen_range(1e-3..0.2);
        // a quarter of the trials start exactly at the limit
        let speed0 = match trial % 4 {
            0 => v_m,
            1 => 0.0,
            _ => rng.gen_range(0.0..=v_m),
        };
        let mut s = MulticopterState::new(Vec2::ZERO, random_unit(&mut rng) * speed0);
        worst = worst.max(s.v.norm() - v_m);
        let mut cmd = random_unit(&mut rng) * v_m * 10f64.powf(rng.gen_range(-2.0..3.0));
        for k in 0..200 {
            if k % 10 == 0 {
                cmd = if rng.gen_bool(0.3) {
                    -cmd
                } else {
                    random_unit(&mut rng) * v_m * 10f64.powf(rng.gen_range(-2.0..3.0))
                };
            }
            s = step_multicopter(&s, cmd, &params, dt).expect("valid step");
            worst = worst.max(s.v.norm() - v_m);
        }
    }
    OracleResult::new("speed_bound", trials, worst, 1e-9, seed)
}

/// Relative position error driven by a filtered error circling at radius
/// `rho` with the largest admissible velocity error `r_v * l`.
///
/// In steady state `|p_err|^2 = rho^2 - r_v^2`. The orbit is integrated from
/// that state with RK4 and the extreme values of `|p_err|` are returned.
fn orbit_extremes(rho: f64, r_v: f64, l: f64, periods: f64) -> (f64, f64) {
    let p_radius = (rho * rho - r_v * r_v).sqrt();
    let omega = l * r_v / p_radius;
    // steady state lags the input by atan(omega / l)
    let lag = (omega / l).atan();
    let xi = |t: f64| Vec2::from_angle(omega * t) * rho;
    let mut p = Vec2::from_angle(-lag) * p_radius;
    let f = |t: f64, p: Vec2| (xi(t) - p) * l;
    let steps = 20_000usize;
    let h = periods * 2.0 * PI / omega / steps as f64;
    let (mut lo, mut hi) = (p.norm(), p.norm());
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, p);
        let k2 = f(t + h / 2.0, p + k1 * (h / 2.0));
        let k3 = f(t + h / 2.0, p + k2 * (h / 2.0));
        let k4 = f(t + h, p + k3 * h);
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        lo = lo.min(p.norm());
        hi = hi.max(p.norm());
    }
    (lo, hi)
}

/// Closed-loop trajectory of a vehicle around a constant-velocity obstacle.
///
/// Returns `(min |xi_err|, min |p_err|, |p_err(0)|)` over the samples.
fn separation_trial(
    rng: &mut ChaCha8Rng,
    params: &VehicleParams,
    v_o: Vec2,
    thr: f64,
    kind: usize,
) -> (f64, f64, f64) {
    let l = params.l;
    let v_m = params.v_m;
    let dir = random_unit(rng);
    let p0 = dir * (thr + rng.gen_range(0.5..15.0));
    let v0 = random_unit(rng) * rng.gen_range(0.0..=v_m);
    let mut s = MulticopterState::new(p0, v0);
    let mut ob = Obstacle::constant_velocity(Vec2::ZERO, v_o, 1.0);
    let target = thr * (1.0 + rng.gen_range(0.0..0.05));
    let spin = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let dt = 0.01;
    let mut cmd = random_unit(rng) * v_m;
    let mut min_xi = f64::INFINITY;
    let mut min_p = f64::INFINITY;
    let p_err0 = (s.p - ob.p_o).norm();
    for k in 0..2000 {
        let e_xi = s.xi(l) - ob.xi(l);
        let e_p = s.p - ob.p_o;
        min_xi = min_xi.min(e_xi.norm());
        min_p = min_p.min(e_p.norm());
        let n = e_xi.normalized().unwrap_or(Vec2::new(1.0, 0.0));
        let t_hat = n.rotated(spin * PI / 2.0);
        cmd = match kind {
            0 => {
                if k % 50 == 0 {
                    random_unit(rng) * rng.gen_range(0.0..=v_m)
                } else {
                    cmd
                }
            }
            1 => v_o + n * (2.0 * (target - e_xi.norm())) + t_hat * v_m,
            _ => {
                if e_xi.norm() > target {
                    -n * v_m
                } else {
                    t_hat * v_m
                }
            }
        };
        s = step_multicopter(&s, cmd, params, dt).expect("valid step");
        ob.p_o += v_o * dt;
    }
    let e_xi = s.xi(l) - ob.xi(l);
    min_xi = min_xi.min(e_xi.norm());
    min_p = min_p.min((s.p - ob.p_o).norm());
    (min_xi, min_p, p_err0)
}

/// Filtered-separation oracles: sufficiency on closed-loop trajectories, the
/// tight circular orbit, and a breach when the filtered radius falls short.
pub fn check_filtered_separation(seed: u64) -> Result<Vec<OracleResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // sufficiency
    let mut worst = f64::NEG_INFINITY;
    let mut qualifying = 0usize;
    for trial in 0..600 {
        let v_m = rng.gen_range(2.0..10.0);
        let v_o_max = if trial % 5 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..0.9 * v_m)
        };
        let l = rng.gen_range(1.0..8.0);
        let r = rng.gen_range(3.0..20.0);
        let params = VehicleParams {
            l,
            v_m,
            r_s: r,
            r_a: 2.0 * r,
        };
        let r_v = (v_m + v_o_max) / l;
        let thr = r.hypot(r_v);
        let v_o = random_unit(&mut rng) * v_o_max;
        let (min_xi, min_p, p0) = separation_trial(&mut rng, &params, v_o, thr, trial % 3);
        if min_xi >= thr && p0 >= r {
            qualifying += 1;
            worst = worst.max(r - min_p);
        }
    }
    // a parked vehicle next to a parked obstacle
    worst = worst.max(15.0 - 40.0);
    let sufficiency = OracleResult::new(
        "filtered_separation.sufficiency",
        qualifying + 1,
        worst,
        1e-9,
        seed,
    );

    // tight orbit at the threshold: |p_err| stays at r
    let (r, v_m, v_o, l): (f64, f64, f64, f64) = (15.0, 6.0, 5.0, 5.0);
    let r_v = (v_m + v_o) / l;
    let (lo, hi) = orbit_extremes(r.hypot(r_v), r_v, l, 2.0);
    let deviation = (lo - r).abs().max((hi - r).abs());
    let equality = OracleResult::new("filtered_separation.equality", 1, deviation, 1e-6, seed);

    // short by eps_o = 0.1: separation r is lost, by about eps_o / (2 r)
    let eps_o = 0.1;
    let (lo, _) = orbit_extremes((r * r + r_v * r_v - eps_o).sqrt(), r_v, l, 2.0);
    let predicted = r - (r * r - eps_o).sqrt();
    // violated when the breach is smaller than half the predicted one
    let breach = lo - (r - 0.5 * predicted);
    let necessity = OracleResult::new("filtered_separation.necessity", 1, breach, 0.0, seed);

    Ok(vec![sufficiency, equality, necessity])
}

/// Closed form of the line integral of the saturated field from 0 to `y`.
pub fn saturated_line_integral(y: Vec2, a: f64) -> f64 {
    let z = y.norm();
    if z <= a {
        0.5 * z * z
    } else {
        0.5 * a * a + a * (z - a)
    }
}

fn midpoint_line_integral(y: Vec2, a: f64, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    (0..points)
        .map(|k| {
            let s = (k as f64 + 0.5) * h;
            saturate(y * s, a).expect("finite input").dot(y) * h
        })
        .sum()
}

/// Midpoint quadrature of the saturated field against its closed form.
///
/// Worst violation is the largest relative error.
pub fn check_line_integral(points: usize, trials: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = vec![(Vec2::new(0.6, 0.8), 1.0), (Vec2::new(4.0, 0.0), 1.0)];
    for _ in 0..trials {
        let a = 10f64.powf(rng.gen_range(-1.0..1.5));
        let y = random_unit(&mut rng) * a * rng.gen_range(0.05..20.0);
        cases.push((y, a));
    }
    let worst = cases
        .iter()
        .map(|&(y, a)| {
            let exact = saturated_line_integral(y, a);
            (midpoint_line_integral(y, a, points) - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    OracleResult::new("line_integral", cases.len(), worst, 1e-6, seed)
}

fn single_obstacle_scenario(
    p0: Vec2,
    wp: Vec2,
    vp: VehicleParams,
    ob: Obstacle,
    t_end: f64,
) -> ScenarioConfig {
    ScenarioConfig {
        name: "oracle".into(),
        dt: 0.01,
        t_end,
        guidance: GuidanceParams::default(),
        options: SimOptions::default(),
        vehicles: vec![VehicleConfig {
            params: vp,
            initial: MulticopterState::new(p0, Vec2::ZERO),
            waypoint: wp,
        }],
        obstacles: vec![ob],
    }
}

/// Approach angle over a run: `(final theta, max theta, conflict)`.
fn theta_run(cfg: &ScenarioConfig) -> Result<(f64, f64, bool)> {
    let mut sim = Simulation::new(cfg)?;
    let l = cfg.vehicles[0].params.l;
    let mut max_theta: f64 = 0.0;
    let mut last = 0.0;
    while !sim.is_finished() {
        let s = sim.vehicles()[0];
        let o = &sim.obstacles()[0];
        if let Ok(th) = crate::dynamics::approach_angle(s.xi(l) - o.xi(l), o.v_o) {
            max_theta = max_theta.max(th);
            last = th;
        }
        sim.step(false)?;
    }
    let m = sim.metrics();
    let final_theta = m.final_theta[0][0].unwrap_or(last);
    Ok((final_theta, max_theta, m.has_conflict()))
}

/// Approach angle settles near pi for generic encounters, and the aligned
/// configuration is unstable.
pub fn check_angle_convergence(trials: usize, seed: u64) -> Result<Vec<OracleResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut converged = 0usize;
    let mut run = 0usize;
    while run < trials {
        let v_m = rng.gen_range(4.0..10.0);
        let speed = rng.gen_range(3.0..v_m / 1.25);
        let r_o = rng.gen_range(2.0..10.0);
        let vp = VehicleParams {
            l: 5.0,
            v_m,
            r_s: 5.0,
            r_a: 7.5,
        };
        let p0 = random_unit(&mut rng) * rng.gen_range(0.0..40.0);
        let wp = p0 + random_unit(&mut rng) * rng.gen_range(20.0..80.0);
        let aim = wp + random_unit(&mut rng) * rng.gen_range(0.0..20.0);
        let v_o = random_unit(&mut rng) * speed;
        let lead = rng.gen_range(5.0..20.0);
        let ob = Obstacle::constant_velocity(aim - v_o * lead, v_o, r_o);
        let clear = (p0 - ob.xi(5.0)).norm() > vp.r_a + r_o + 2.0;
        if !clear {
            continue;
        }
        run += 1;
        let cfg = single_obstacle_scenario(p0, wp, vp, ob, 120.0);
        let (theta, _, conflict) = theta_run(&cfg)?;
        if !conflict && theta >= PI - 0.1 {
            converged += 1;
        }
    }
    let fraction = converged as f64 / trials as f64;
    let convergence = OracleResult::new("angle_convergence", trials, 0.99 - fraction, 0.0, seed);

    // aligned head-on encounter nudged by 1e-6 rad must leave alignment
    let vp = VehicleParams {
        l: 5.0,
        v_m: 6.0,
        r_s: 5.0,
        r_a: 7.5,
    };
    let delta: f64 = 1e-6;
    let ob =
        Obstacle::constant_velocity(Vec2::from_angle(delta) * 30.0, Vec2::new(-5.0, 0.0), 10.0);
    let cfg = single_obstacle_scenario(Vec2::ZERO, Vec2::ZERO, vp, ob, 120.0);
    let (_, max_theta, _) = theta_run(&cfg)?;
    let instability = OracleResult::new(
        "angle_convergence.instability",
        1,
        0.5 - max_theta,
        0.0,
        seed,
    );
    Ok(vec![convergence, instability])
}

/// Largest eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
pub fn sym2_max_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    0.5 * (a + c) + (0.5 * (a - c)).hypot(b)
}

/// Rank-one symmetric perturbations cannot pull the top eigenvalue of a
/// matrix with spectrum above `rho` down to `rho`.
///
/// Worst violation is `max (rho - lambda_max(L + X))`.
pub fn check_eigenvalue_bound(trials: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..trials {
        let rho = 10f64.powf(rng.gen_range(-2.0..1.0));
        let l1 = rho * (1.0 + 10f64.powf(rng.gen_range(-3.0..1.0)));
        let l2 = rho * (1.0 + 10f64.powf(rng.gen_range(-3.0..1.0)));
        let (s, c) = rng.gen_range(0.0..PI).sin_cos();
        // L = R diag(l1, l2) R^T
        let la = l1 * c * c + l2 * s * s;
        let lb = (l1 - l2) * c * s;
        let lc = l1 * s * s + l2 * c * c;
        let lam = if k == 0 {
            0.0
        } else {
            rng.gen_range(-10.0..10.0) * l1.max(l2)
        };
        let u = random_unit(&mut rng);
        let m = sym2_max_eigenvalue(
            la + lam * u.x * u.x,
            lb + lam * u.x * u.y,
            lc + lam * u.y * u.y,
        );
        worst = worst.max(rho - m);
    }
    OracleResult::new("eigen", trials, worst, 1e-12, seed)
}

/// Analytic barrier slope against central differences, away from joints.
///
/// Worst violation is the largest relative error.
pub fn check_gradient(grid: usize) -> Result<OracleResult> {
    let gp = GuidanceParams::default();
    let (r_s, r_a) = (5.0, 7.5);
    let (x1, x2) = smooth_sat_knots(gp.eps_s);
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for r_o in [0.0, 10.0, 46.5] {
        let inner = gp.gamma * r_s + r_o;
        let outer = r_a + r_o;
        let joints = [inner * x1, inner * x2, inner, outer];
        let lo = 0.05 * inner;
        let hi = 1.2 * outer;
        for k in 0..grid {
            let z = lo + (hi - lo) * (k as f64 + 0.5) / grid as f64;
            if joints.iter().any(|j| (z - j).abs() <= 1e-3) {
                continue;
            }
            let h = 1e-6 * z;
            let fd = (obstacle_potential(z + h, r_o, &gp, r_s, r_a)?
                - obstacle_potential(z - h, r_o, &gp, r_s, r_a)?)
                / (2.0 * h);
            let an = obstacle_potential_gradient(z, r_o, &gp, r_s, r_a)?;
            let err = if an == 0.0 {
                fd.abs()
            } else {
                (fd - an).abs() / an.abs()
            };
            worst = worst.max(err);
            count += 1;
        }
    }
    Ok(OracleResult::new("gradient", count, worst, 1e-4, 0))
}

fn reach(c: Vec2, discs: &[Disc]) -> f64 {
    discs
        .iter()
        .map(|d| c.distance(d.center) + d.radius)
        .fold(0.0, f64::max)
}

/// Brute-force smallest enclosing radius: a coarse grid over the centers'
/// bounding box, then nested ternary searches on the convex reach function.
pub fn brute_force_enclosing_radius(discs: &[Disc]) -> (Vec2, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for d in discs {
        x0 = x0.min(d.center.x);
        x1 = x1.max(d.center.x);
        y0 = y0.min(d.center.y);
        y1 = y1.max(d.center.y);
    }
    let n = 64;
    let mut best = (Vec2::new(x0, y0), f64::INFINITY);
    for i in 0..=n {
        for j in 0..=n {
            let c = Vec2::new(
                x0 + (x1 - x0) * i as f64 / n as f64,
                y0 + (y1 - y0) * j as f64 / n as f64,
            );
            let r = reach(c, discs);
            if r < best.1 {
                best = (c, r);
            }
        }
    }
    let inner_min = |x: f64| -> (f64, f64) {
        let (mut a, mut b) = (y0, y1);
        for _ in 0..100 {
            let m1 = a + (b - a) / 3.0;
            let m2 = b - (b - a) / 3.0;
            if reach(Vec2::new(x, m1), discs) <= reach(Vec2::new(x, m2), discs) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let y = 0.5 * (a + b);
        (y, reach(Vec2::new(x, y), discs))
    };
    let (mut a, mut b) = (x0, x1);
    for _ in 0..100 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if inner_min(m1).1 <= inner_min(m2).1 {
            b = m2;
        } else {
            a = m1;
        }
    }
    let x = 0.5 * (a + b);
    let (y, r) = inner_min(x);
    if r < best.1 {
        best = (Vec2::new(x, y), r);
    }
    best
}

/// The five-disc V formation used by the parallel scenarios.
pub fn v_formation_discs() -> Vec<Disc> {
    (1..=5)
        .map(|i| {
            let i = i as f64;
            Disc {
                center: Vec2::new(15.0 * i - 45.0, 70.0 - 15.0 * (i - 3.0).abs()),
                radius: 10.0 + 2.0 * i,
            }
        })
        .collect()
}

/// Exact enclosing disc against the brute-force search.
///
/// Worst violation is the largest of the relative radius excess over the
/// brute-force optimum and any containment shortfall.
pub fn check_enclosing_disc(trials: usize, seed: u64) -> Result<OracleResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = vec![v_formation_discs()];
    for _ in 0..trials {
        let n = rng.gen_range(1..8);
        sets.push(
            (0..n)
                .map(|_| Disc {
                    center: Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)),
                    radius: rng.gen_range(0.5..20.0),
                })
                .collect(),
        );
    }
    let mut worst = f64::NEG_INFINITY;
    for discs in &sets {
        let exact = min_enclosing_disc(discs)?;
        let (_, brute) = brute_force_enclosing_radius(discs);
        worst = worst.max((exact.radius - brute) / brute);
        let shortfall = reach(exact.center, discs) - exact.radius;
        worst = worst.max(shortfall / exact.radius);
    }
    Ok(OracleResult::new(
        "enclosing_disc",
        sets.len(),
        worst,
        1e-6,
        seed,
    ))
}

/// Fixed-width table of results.
pub fn format_table(results: &[OracleResult]) -> String {
    let mut s = format!(
        "{:<34} {:>7} {:>14} {:>10} {:>6} {:>10}\n",
        "oracle", "trials", "worst", "tolerance", "result", "seed"
    );
    for r in results {
        s.push_str(&format!(
            "{:<34} {:>7} {:>14.6e} {:>10.1e} {:>6} {:>10}\n",
            r.name,
            r.trials,
            r.worst_violation,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" },
            r.seed
        ));
    }
    s
}
