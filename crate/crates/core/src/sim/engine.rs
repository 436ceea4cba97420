use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    approach_angle, step_multicopter, step_obstacle, MulticopterState, Obstacle, ObstacleEnv,
};
use crate::error::{Error, Result};
use crate::guidance::{obstacle_potential, repulsive_gain, velocity_command, waypoint_potential};
use crate::mathcore::Vec2;
use crate::multiobs::{combine_parallel, group_parallel};
use crate::sim::monitor::{deadlock_check, ArrivalMonitor, WindowSample};
use crate::sim::{ScenarioConfig, SelectionPolicy};

/// Telemetry of one vehicle at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub p: Vec2,
    pub v: Vec2,
    pub xi: Vec2,
    pub v_c: Vec2,
    /// Distance to the waypoint (m).
    pub dwp: f64,
    /// Waypoint potential.
    pub v_w: f64,
}

/// Telemetry of one (vehicle, obstacle) pair at one sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrace {
    /// Filtered center distance (m).
    pub dxi: f64,
    /// Physical center distance (m).
    pub dp: f64,
    /// Approach angle, absent for a motionless obstacle.
    pub theta: Option<f64>,
    /// Barrier potential.
    pub v_o: f64,
    /// Repulsive gain.
    pub a_o: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub vehicles: Vec<VehicleTrace>,
    /// Indexed `[vehicle][obstacle]`.
    pub obstacles: Vec<Vec<ObstacleTrace>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictEvent {
    pub t: f64,
    pub vehicle: usize,
    pub obstacle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeerConflictEvent {
    pub t: f64,
    pub vehicle: usize,
    pub peer: usize,
}

/// Aggregate safety and convergence figures of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Smallest `|xi_o_err| - (r_s + r_o)` over time, vehicles and obstacles.
    pub min_filtered_margin: Option<f64>,
    /// Smallest `|p_o_err| - (r_s + r_o)`.
    pub min_physical_margin: Option<f64>,
    /// Time the last vehicle arrived, if all did.
    pub arrival_time: Option<f64>,
    pub arrival_times: Vec<Option<f64>>,
    /// Onsets of filtered separation loss (`margin <= 0`).
    pub conflict_events: Vec<ConflictEvent>,
    /// Any vehicle stuck in the trailing window.
    pub deadlock: bool,
    pub deadlocks: Vec<bool>,
    /// Approach angle at the final sample, indexed `[vehicle][obstacle]`.
    pub final_theta: Vec<Vec<Option<f64>>>,
    /// Smallest filtered distance between vehicles minus `r_s + peer_radius`.
    pub min_peer_margin: Option<f64>,
    pub peer_conflict_events: Vec<PeerConflictEvent>,
    pub warnings: Vec<String>,
    pub steps: usize,
    pub t_end: f64,
}

impl SimMetrics {
    pub fn has_conflict(&self) -> bool {
        !self.conflict_events.is_empty()
    }
}

fn at_time(t: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::DegenerateGeometry(message) => Error::SimulationGeometry { t, message },
        other => other,
    }
}

fn fold_min(acc: &mut Option<f64>, x: f64) {
    *acc = Some(acc.map_or(x, |a| a.min(x)));
}

/// Fixed-step closed-loop simulation.
///
/// Each call to [`Simulation::step`] evaluates every command from the state
/// at the current sample, updates the monitors, then advances all vehicles
/// and obstacles together. The final sample at `t_end` is observed without
/// advancing.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: ScenarioConfig,
    n_steps: usize,
    k: usize,
    vehicles: Vec<MulticopterState>,
    obstacles: Vec<Obstacle>,
    arrival: Vec<ArrivalMonitor>,
    windows: Vec<VecDeque<WindowSample>>,
    window_len: usize,
    in_conflict: Vec<Vec<bool>>,
    peer_in_conflict: HashSet<(usize, usize)>,
    warned_pairs: HashSet<(usize, usize)>,
    min_filtered_margin: Option<f64>,
    min_physical_margin: Option<f64>,
    min_peer_margin: Option<f64>,
    min_peer_distance: Option<f64>,
    conflict_events: Vec<ConflictEvent>,
    peer_conflict_events: Vec<PeerConflictEvent>,
    warnings: Vec<String>,
    final_theta: Vec<Vec<Option<f64>>>,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let nv = cfg.vehicles.len();
        let no = cfg.obstacles.len();
        let window_len = (cfg.options.deadlock_window / cfg.dt).round() as usize + 1;
        Ok(Self {
            n_steps: cfg.steps(),
            k: 0,
            vehicles: cfg.vehicles.iter().map(|v| v.initial).collect(),
            obstacles: cfg.obstacles.clone(),
            arrival: (0..nv)
                .map(|_| ArrivalMonitor::new(cfg.options.arrival_tol, cfg.options.arrival_hold))
                .collect(),
            windows: vec![VecDeque::with_capacity(window_len); nv],
            window_len,
            in_conflict: vec![vec![false; no]; nv],
            peer_in_conflict: HashSet::new(),
            warned_pairs: HashSet::new(),
            min_filtered_margin: None,
            min_physical_margin: None,
            min_peer_margin: None,
            min_peer_distance: None,
            conflict_events: Vec::new(),
            peer_conflict_events: Vec::new(),
            warnings: Vec::new(),
            final_theta: vec![vec![None; no]; nv],
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Time of the next sample to be observed.
    pub fn time(&self) -> f64 {
        self.k as f64 * self.cfg.dt
    }

    pub fn is_finished(&self) -> bool {
        self.k > self.n_steps
    }

    pub fn vehicles(&self) -> &[MulticopterState] {
        &self.vehicles
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Smallest filtered distance between two vehicles at the last observed sample.
    pub fn min_peer_distance(&self) -> Option<f64> {
        self.min_peer_distance
    }

    /// Obstacles as the guidance law sees them, combined when enabled.
    fn guidance_obstacles(&self) -> Result<Vec<Obstacle>> {
        if !self.cfg.options.combine_parallel {
            return Ok(self.obstacles.clone());
        }
        group_parallel(&self.obstacles, self.cfg.options.vel_tol)
            .iter()
            .map(|g| {
                let members: Vec<Obstacle> = g.iter().map(|&k| self.obstacles[k].clone()).collect();
                combine_parallel(&members, self.cfg.options.vel_tol)
            })
            .collect()
    }

    fn check_spacing(&mut self, t: f64, guide: &[Obstacle], group_keys: &[usize]) {
        let r_a = self
            .cfg
            .vehicles
            .iter()
            .map(|v| v.params.r_a)
            .fold(0.0, f64::max);
        for a in 0..guide.len() {
            for b in a + 1..guide.len() {
                let need = 2.0 * r_a + guide[a].r_o + guide[b].r_o;
                let d = guide[a].p_o.distance(guide[b].p_o);
                let key = (group_keys[a], group_keys[b]);
                if d < need && self.warned_pairs.insert(key) {
                    self.warnings.push(format!(
                        "t = {t:.2} s: obstacles {} and {} are {d:.3} m apart, closer than {need:.3} m",
                        key.0, key.1
                    ));
                }
            }
        }
    }

    /// Observes the current sample and advances one step unless at `t_end`.
    ///
    /// Returns the sample's telemetry when `record` is set.
    pub fn step(&mut self, record: bool) -> Result<Option<TraceRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let t = self.time();
        let last = self.k == self.n_steps;
        let cfg = &self.cfg;
        let nv = self.vehicles.len();
        let gp = cfg.guidance;
        let opts = &cfg.options;

        let guide = self.guidance_obstacles().map_err(at_time(t))?;
        let xis: Vec<Vec2> = self
            .vehicles
            .iter()
            .zip(&cfg.vehicles)
            .map(|(s, v)| s.xi(v.params.l))
            .collect();

        // commands from the state at t
        let mut commands = Vec::with_capacity(nv);
        let mut active: Vec<(Vec2, f64)> = Vec::new();
        for i in 0..nv {
            let vc = &cfg.vehicles[i];
            let (l, r_a) = (vc.params.l, vc.params.r_a);
            active.clear();
            for o in &guide {
                let e = xis[i] - o.xi(l);
                if e.norm() < r_a + o.r_o {
                    active.push((e, o.r_o));
                }
            }
            if opts.peers_as_obstacles {
                for (j, xj) in xis.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let e = xis[i] - *xj;
                    if e.norm() < r_a + opts.peer_radius {
                        active.push((e, opts.peer_radius));
                    }
                }
            }
            if opts.selection_policy == SelectionPolicy::NearestWithin && active.len() > 1 {
                let best = active
                    .iter()
                    .copied()
                    .reduce(|b, c| if c.0.norm() < b.0.norm() { c } else { b })
                    .into_iter();
                active = best.collect();
            }
            let u = velocity_command(xis[i] - vc.waypoint, &active, &gp, &vc.params)
                .map_err(at_time(t))?;
            commands.push(u);
        }

        // monitors on the real obstacles
        let mut rec = record.then(|| TraceRecord {
            t,
            vehicles: Vec::with_capacity(nv),
            obstacles: Vec::with_capacity(nv),
        });
        for i in 0..nv {
            let vc = &cfg.vehicles[i];
            let vp = &vc.params;
            let s = self.vehicles[i];
            let dwp = s.p.distance(vc.waypoint);
            self.arrival[i].observe(t, dwp);
            let win = &mut self.windows[i];
            if win.len() == self.window_len {
                win.pop_front();
            }
            win.push_back(WindowSample {
                t,
                vc_norm: commands[i].norm(),
                wp_distance: dwp,
            });

            let mut row = Vec::new();
            for (k, o) in self.obstacles.iter().enumerate() {
                let e = xis[i] - o.xi(vp.l);
                let dxi = e.norm();
                let dp = s.p.distance(o.p_o);
                let safe = vp.r_s + o.r_o;
                let margin = dxi - safe;
                fold_min(&mut self.min_filtered_margin, margin);
                fold_min(&mut self.min_physical_margin, dp - safe);
                let conflict = margin <= 0.0;
                if conflict && !self.in_conflict[i][k] {
                    self.conflict_events.push(ConflictEvent {
                        t,
                        vehicle: i,
                        obstacle: k,
                    });
                }
                self.in_conflict[i][k] = conflict;
                if last || rec.is_some() {
                    let theta = approach_angle(e, o.v_o).ok();
                    if last {
                        self.final_theta[i][k] = theta;
                    }
                    if rec.is_some() {
                        let (v_o, a_o) = if dxi > 0.0 {
                            (
                                obstacle_potential(dxi, o.r_o, &gp, vp.r_s, vp.r_a)?,
                                repulsive_gain(dxi, o.r_o, &gp, vp.r_s, vp.r_a)?,
                            )
                        } else {
                            (f64::INFINITY, f64::INFINITY)
                        };
                        row.push(ObstacleTrace {
                            dxi,
                            dp,
                            theta,
                            v_o,
                            a_o,
                        });
                    }
                }
            }
            if let Some(r) = rec.as_mut() {
                r.vehicles.push(VehicleTrace {
                    p: s.p,
                    v: s.v,
                    xi: xis[i],
                    v_c: commands[i],
                    dwp,
                    v_w: waypoint_potential(xis[i] - vc.waypoint, gp.k1, vp.v_m)?,
                });
                r.obstacles.push(row);
            }
        }

        if opts.peers_as_obstacles && nv > 1 {
            let mut min_d = f64::INFINITY;
            for i in 0..nv {
                for j in i + 1..nv {
                    let d = xis[i].distance(xis[j]);
                    min_d = min_d.min(d);
                    let safe = cfg.vehicles[i].params.r_s.max(cfg.vehicles[j].params.r_s)
                        + opts.peer_radius;
                    fold_min(&mut self.min_peer_margin, d - safe);
                    if d <= safe {
                        if self.peer_in_conflict.insert((i, j)) {
                            self.peer_conflict_events.push(PeerConflictEvent {
                                t,
                                vehicle: i,
                                peer: j,
                            });
                        }
                    } else {
                        self.peer_in_conflict.remove(&(i, j));
                    }
                }
            }
            self.min_peer_distance = Some(min_d);
        }

        if guide.len() > 1 {
            let keys: Vec<usize> = if opts.combine_parallel {
                group_parallel(&self.obstacles, opts.vel_tol)
                    .iter()
                    .map(|g| g[0])
                    .collect()
            } else {
                (0..guide.len()).collect()
            };
            self.check_spacing(t, &guide, &keys);
        }

        if !last {
            let dt = self.cfg.dt;
            let env = ObstacleEnv {
                t,
                l: self.cfg.vehicles[0].params.l,
                target_xi: xis[0],
                target_xi_dot: commands[0],
            };
            for o in self.obstacles.iter_mut() {
                *o = step_obstacle(o, &env, dt).map_err(at_time(t))?;
            }
            for (i, s) in self.vehicles.iter_mut().enumerate() {
                *s = step_multicopter(s, commands[i], &self.cfg.vehicles[i].params, dt)?;
            }
        }
        self.k += 1;
        Ok(rec)
    }

    /// Metrics of the samples observed so far.
    pub fn metrics(&self) -> SimMetrics {
        let arrival_times: Vec<Option<f64>> = self.arrival.iter().map(|a| a.arrived_at()).collect();
        let arrival_time = arrival_times
            .iter()
            .try_fold(0.0f64, |m, a| a.map(|t| m.max(t)));
        let deadlocks: Vec<bool> = self
            .windows
            .iter()
            .zip(&self.cfg.vehicles)
            .zip(&arrival_times)
            .map(|((w, v), a)| {
                let w: Vec<WindowSample> = w.iter().copied().collect();
                let full = w.len() == self.window_len;
                full && deadlock_check(&w, v.params.v_m, self.cfg.options.arrival_tol, a.is_some())
            })
            .collect();
        SimMetrics {
            min_filtered_margin: self.min_filtered_margin,
            min_physical_margin: self.min_physical_margin,
            arrival_time,
            arrival_times,
            conflict_events: self.conflict_events.clone(),
            deadlock: deadlocks.iter().any(|&d| d),
            deadlocks,
            final_theta: self.final_theta.clone(),
            min_peer_margin: self.min_peer_margin,
            peer_conflict_events: self.peer_conflict_events.clone(),
            warnings: self.warnings.clone(),
            steps: self.k.saturating_sub(1),
            t_end: self.cfg.t_end,
        }
    }

    /// Steps to the end, passing every `record_every`-th sample to `sink`
    /// (none when `record_every` is 0).
    pub fn run_to_end(
        &mut self,
        record_every: usize,
        mut sink: impl FnMut(TraceRecord) -> Result<()>,
    ) -> Result<SimMetrics> {
        while !self.is_finished() {
            let want =
                record_every > 0 && (self.k.is_multiple_of(record_every) || self.k == self.n_steps);
            if let Some(r) = self.step(want)? {
                sink(r)?;
            }
        }
        Ok(self.metrics())
    }
}

/// Runs a scenario to `t_end`, recording every sample.
pub fn run(scenario: &ScenarioConfig) -> Result<(Vec<TraceRecord>, SimMetrics)> {
    run_with(scenario, 1)
}

/// Runs a scenario keeping every `record_every`-th sample (none for 0).
pub fn run_with(
    scenario: &ScenarioConfig,
    record_every: usize,
) -> Result<(Vec<TraceRecord>, SimMetrics)> {
    let mut sim = Simulation::new(scenario)?;
    let mut trace = Vec::new();
    let metrics = sim.run_to_end(record_every, |r| {
        trace.push(r);
        Ok(())
    })?;
    Ok((trace, metrics))
}
