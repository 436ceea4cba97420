use apfguard::dynamics::{approach_angle, step_multicopter, step_multicopter_rk4};
use apfguard::guidance::{obstacle_potential, repulsion_window, repulsive_gain, velocity_command};
use apfguard::mathcore::{bump, bump_deriv, min_enclosing_disc, saturate, smooth_sat};
use apfguard::multiobs::{combine_parallel, select_active, validate};
use apfguard::scenario_io::builtin_with_seed;
use apfguard::sim::SelectionPolicy;
use apfguard::{Disc, GuidanceParams, MulticopterState, Obstacle, Vec2, VehicleParams};
use proptest::prelude::*;

fn vec2(limit: f64) -> impl Strategy<Value = Vec2> {
    (-limit..limit, -limit..limit).prop_map(|(x, y)| Vec2::new(x, y))
}

fn params() -> impl Strategy<Value = VehicleParams> {
    (0.5..10.0f64, 1.0..12.0f64).prop_map(|(l, v_m)| VehicleParams {
        l,
        v_m,
        r_s: 5.0,
        r_a: 7.5,
    })
}

fn disc() -> impl Strategy<Value = Disc> {
    (vec2(60.0), 0.0..15.0f64).prop_map(|(center, radius)| Disc { center, radius })
}

proptest! {
    #[test]
    fn saturate_bounds_and_parallel(v in vec2(1e3), v_max in 1e-3..50.0f64) {
        let s = saturate(v, v_max).unwrap();
        prop_assert!(s.norm() <= v_max * (1.0 + 1e-15));
        if v.norm() <= v_max {
            prop_assert_eq!(s, v);
        }
        prop_assert!(v.cross(s).abs() <= 1e-12 * v.norm() * v.norm().max(1.0));
        if v != Vec2::ZERO {
            prop_assert!(v.dot(s) > 0.0);
        }
    }

    #[test]
    fn bump_monotone_and_continuous(d1 in 0.1..50.0f64, width in 0.05..30.0f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let d2 = d1 + width;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = d1 + lo * width;
        let y = d1 + hi * width;
        prop_assert!(bump(x, d1, d2).unwrap() >= bump(y, d1, d2).unwrap());
        // slope near a joint grows like h / width^2, so probe relative to the width
        let h = 1e-9 * width;
        for (j, val) in [(d1, 1.0), (d2, 0.0)] {
            prop_assert!((bump(j - h, d1, d2).unwrap() - val).abs() < 1e-6);
            prop_assert!((bump(j + h, d1, d2).unwrap() - val).abs() < 1e-6);
            prop_assert!(bump_deriv(j - h, d1, d2).unwrap().abs() * width < 1e-6);
            prop_assert!(bump_deriv(j + h, d1, d2).unwrap().abs() * width < 1e-6);
        }
    }

    #[test]
    fn smooth_sat_below_min(x in 0.0..3.0f64, eps_s in 1e-4..0.2f64) {
        prop_assert!(smooth_sat(x, eps_s).unwrap() <= x.min(1.0));
    }

    #[test]
    fn enclosing_disc_contains_and_ignores_order(discs in prop::collection::vec(disc(), 1..9), rot in 0usize..9) {
        let d = min_enclosing_disc(&discs).unwrap();
        for c in &discs {
            prop_assert!(d.center.distance(c.center) + c.radius <= d.radius + 1e-9);
        }
        let mut shuffled = discs.clone();
        shuffled.reverse();
        let k = rot % shuffled.len();
        shuffled.rotate_left(k);
        let e = min_enclosing_disc(&shuffled).unwrap();
        prop_assert!((e.radius - d.radius).abs() <= 1e-9 * d.radius.max(1.0));
        prop_assert!(e.center.distance(d.center) <= 1e-6 * d.radius.max(1.0));
    }

    #[test]
    fn combined_disc_contains_members(p in prop::collection::vec((vec2(80.0), 1.0..15.0f64), 1..6), v in vec2(8.0)) {
        let obs: Vec<Obstacle> = p.iter().map(|&(c, r)| Obstacle::constant_velocity(c, v, r)).collect();
        let c = combine_parallel(&obs, 1e-6).unwrap();
        for o in &obs {
            prop_assert!(c.p_o.distance(o.p_o) + o.r_o <= c.r_o + 1e-9);
        }
        prop_assert!(c.v_o.distance(v) <= 1e-12 * v.norm().max(1.0));
    }

    #[test]
    fn zoh_matches_rk4(vp in params(), p in vec2(10.0), v in vec2(10.0), u in vec2(20.0), dt in 1e-3..0.1f64) {
        let s = MulticopterState::new(p, saturate(v, vp.v_m).unwrap());
        let a = step_multicopter(&s, u, &vp, dt).unwrap();
        let b = step_multicopter_rk4(&s, u, &vp, dt, 100).unwrap();
        prop_assert!(a.p.distance(b.p) <= 1e-8);
        prop_assert!(a.v.distance(b.v) <= 1e-8);
    }

    #[test]
    fn filtered_position_integrates_command(vp in params(), p in vec2(10.0), v in vec2(10.0), u in vec2(20.0), dt in 1e-3..0.1f64) {
        let s = MulticopterState::new(p, saturate(v, vp.v_m).unwrap());
        let next = step_multicopter(&s, u, &vp, dt).unwrap();
        let held = saturate(u, vp.v_m).unwrap();
        let expected = s.xi(vp.l) + held * dt;
        prop_assert!(next.xi(vp.l).distance(expected) <= 1e-12);
    }

    #[test]
    fn speed_stays_bounded(vp in params(), v in vec2(12.0), cmds in prop::collection::vec(vec2(1e4), 1..60), dt in 1e-3..0.2f64) {
        let mut s = MulticopterState::new(Vec2::ZERO, saturate(v, vp.v_m).unwrap());
        for u in cmds {
            s = step_multicopter(&s, u, &vp, dt).unwrap();
            prop_assert!(s.v.norm() <= vp.v_m + 1e-9);
        }
    }

    #[test]
    fn approach_angle_ignores_scale(e in vec2(50.0), v in vec2(10.0), a in 1e-3..1e3f64, b in 1e-3..1e3f64) {
        prop_assume!(e.norm() > 1e-6 && v.norm() > 1e-6);
        let t0 = approach_angle(e, v).unwrap();
        let t1 = approach_angle(e * a, v * b).unwrap();
        prop_assert!((t0 - t1).abs() <= 1e-7);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&t0));
    }

    #[test]
    fn command_is_bounded(wp in vec2(1e4), obs in prop::collection::vec((vec2(30.0), 0.0..15.0f64), 0..4), v_m in 0.5..20.0f64) {
        let vp = VehicleParams { l: 5.0, v_m, r_s: 5.0, r_a: 7.5 };
        let gp = GuidanceParams::default();
        let near: Vec<(Vec2, f64)> = obs.into_iter().filter(|(e, _)| e.norm() > 1e-3).collect();
        let u = velocity_command(wp, &near, &gp, &vp).unwrap();
        prop_assert!(u.norm() <= v_m * (1.0 + 1e-15));
    }

    #[test]
    fn command_without_obstacles_is_attraction(wp in vec2(1e4), k1 in 0.1..5.0f64, v_m in 0.5..20.0f64) {
        let vp = VehicleParams { l: 5.0, v_m, r_s: 5.0, r_a: 7.5 };
        let gp = GuidanceParams { k1, ..GuidanceParams::default() };
        let far = vec![(Vec2::new(100.0, 0.0), 10.0)];
        let expected = -saturate(wp * k1, v_m).unwrap();
        prop_assert_eq!(velocity_command(wp, &[], &gp, &vp).unwrap(), expected);
        prop_assert_eq!(velocity_command(wp, &far, &gp, &vp).unwrap(), expected);
    }

    #[test]
    fn nearest_is_subset_of_all(xi in vec2(40.0), obs in prop::collection::vec((vec2(40.0), 0.0..10.0f64), 0..6)) {
        let obs: Vec<Obstacle> = obs.into_iter().map(|(p, r)| Obstacle::constant_velocity(p, Vec2::ZERO, r)).collect();
        let all = select_active(xi, &obs, 5.0, 7.5, SelectionPolicy::AllWithin);
        let nearest = select_active(xi, &obs, 5.0, 7.5, SelectionPolicy::NearestWithin);
        prop_assert!(nearest.len() <= 1);
        prop_assert_eq!(nearest.is_empty(), all.is_empty());
        for n in &nearest {
            prop_assert!(all.contains(n));
            prop_assert!(all.iter().all(|a| a.0.norm() >= n.0.norm()));
        }
    }

    #[test]
    fn validate_is_pure(seed in 0u64..500) {
        let cfg = builtin_with_seed("nonparallel_4", seed).unwrap();
        prop_assert_eq!(validate(&cfg), validate(&cfg));
    }
}

fn window_grid(r_o: f64, gp: &GuidanceParams) -> (f64, f64, Vec<f64>) {
    let (inner, outer) = repulsion_window(r_o, gp, 5.0, 7.5).unwrap();
    let grid = (1..=4000)
        .map(|k| outer * 1.1 * k as f64 / 4000.0)
        .collect();
    (inner, outer, grid)
}

#[test]
fn barrier_potential_nonincreasing() {
    for eps in [1e-2, 1e-3, 1e-4] {
        let gp = GuidanceParams {
            eps,
            ..GuidanceParams::default()
        };
        for r_o in [0.0, 10.0, 46.5] {
            let (_, _, grid) = window_grid(r_o, &gp);
            let vals: Vec<f64> = grid
                .iter()
                .map(|&z| obstacle_potential(z, r_o, &gp, 5.0, 7.5).unwrap())
                .collect();
            for w in vals.windows(2) {
                assert!(w[0] >= w[1], "eps {eps} r_o {r_o}: {} < {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn barrier_denominator_dominates_eps_z() {
    // V_o = k2 sigma / D with sigma <= 1, so D >= eps z means V_o eps z <= k2
    for eps in [1e-2, 1e-3, 1e-4] {
        let gp = GuidanceParams {
            eps,
            ..GuidanceParams::default()
        };
        for r_o in [0.0, 10.0, 46.5] {
            let (_, _, grid) = window_grid(r_o, &gp);
            for z in grid {
                let v = obstacle_potential(z, r_o, &gp, 5.0, 7.5).unwrap();
                assert!(v.is_finite() && v >= 0.0);
                assert!(v * eps * z <= gp.k2 * (1.0 + 1e-12), "z {z}");
            }
        }
    }
}

#[test]
fn barrier_outweighs_saturated_attraction() {
    // the attraction is clipped at v_m, the repulsion inside gamma r_s + r_o is not
    for eps in [1e-4, 1e-5] {
        let gp = GuidanceParams {
            eps,
            ..GuidanceParams::default()
        };
        for r_o in [0.0, 10.0, 46.5] {
            let (inner, _) = repulsion_window(r_o, &gp, 5.0, 7.5).unwrap();
            for delta in [0.05, 0.1, 0.2] {
                let z = (1.0 - delta) * inner;
                let push = repulsive_gain(z, r_o, &gp, 5.0, 7.5).unwrap() * z;
                for v_m in [1.0, 6.0, 10.0] {
                    assert!(push > v_m, "eps {eps} r_o {r_o} delta {delta}: {push}");
                }
            }
        }
    }
}
