//! Smallest disc enclosing a set of discs.
//!
//! Welzl-style randomized incremental construction over discs. The support
//! set of the optimum has at most three members, each internally tangent to
//! the result. Insertion order is shuffled with a fixed seed so results are
//! reproducible.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mathcore::Vec2;

const SHUFFLE_SEED: u64 = 0x5eed_d15c;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Result<Self> {
        if !center.is_finite() || !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!(
                "disc needs a finite center and positive radius, got {center}, {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    /// Whether `other` lies inside `self`, with a relative slack for rounding.
    pub fn contains(&self, other: &Disc) -> bool {
        let reach = self.center.distance(other.center) + other.radius;
        reach <= self.radius + containment_slack(self.radius)
    }
}

#[inline]
fn containment_slack(radius: f64) -> f64 {
    1e-12 * radius.max(1.0)
}

/// Minimal disc containing every input disc.
pub fn min_enclosing_disc(discs: &[Disc]) -> Result<Disc> {
    if discs.is_empty() {
        return Err(invalid("cannot enclose an empty set of discs"));
    }
    if let Some(d) = discs
        .iter()
        .find(|d| !d.center.is_finite() || !(d.radius > 0.0 && d.radius.is_finite()))
    {
        return Err(invalid(format!("bad disc {d:?}")));
    }

    // canonical order first, so permuted inputs see the same shuffle
    let mut order: Vec<Disc> = discs.to_vec();
    order.sort_by(|a, b| {
        a.center
            .x
            .total_cmp(&b.center.x)
            .then(a.center.y.total_cmp(&b.center.y))
            .then(a.radius.total_cmp(&b.radius))
    });
    order.dedup();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(SHUFFLE_SEED));

    let mut best = order[0];
    for i in 1..order.len() {
        if !best.contains(&order[i]) {
            best = with_one(&order[..i], order[i]);
        }
    }
    Ok(best)
}

fn with_one(prefix: &[Disc], a: Disc) -> Disc {
    let mut best = a;
    for j in 0..prefix.len() {
        if !best.contains(&prefix[j]) {
            best = with_two(&prefix[..j], a, prefix[j]);
        }
    }
    best
}

fn with_two(prefix: &[Disc], a: Disc, b: Disc) -> Disc {
    let mut best = enclose_two(a, b);
    for &c in prefix {
        if !best.contains(&c) {
            best = enclose_three(a, b, c);
        }
    }
    best
}

fn enclose_two(a: Disc, b: Disc) -> Disc {
    if a.contains(&b) {
        return a;
    }
    if b.contains(&a) {
        return b;
    }
    let d = b.center - a.center;
    let dist = d.norm();
    let radius = 0.5 * (dist + a.radius + b.radius);
    let center = a.center + d * ((radius - a.radius) / dist);
    Disc { center, radius }
}

/// Disc internally tangent to all three inputs (Apollonius, inner case).
///
/// Falls back to the best pairwise enclosure when the tangency system has no
/// admissible root, which only happens on rounding-level degeneracies.
fn enclose_three(a: Disc, b: Disc, c: Disc) -> Disc {
    for (big, x, y) in [(a, b, c), (b, a, c), (c, a, b)] {
        if big.contains(&x) && big.contains(&y) {
            return big;
        }
    }
    if let Some(d) = apollonius_inner(a, b, c) {
        if d.contains(&a) && d.contains(&b) && d.contains(&c) {
            return d;
        }
    }
    let mut candidates = [enclose_two(a, b), enclose_two(a, c), enclose_two(b, c)];
    candidates.sort_by(|p, q| p.radius.total_cmp(&q.radius));
    candidates
        .iter()
        .copied()
        .find(|d| d.contains(&a) && d.contains(&b) && d.contains(&c))
        .unwrap_or_else(|| {
            // grow the largest pairwise disc to cover the third
            let d = candidates[2];
            let reach = [a, b, c]
                .iter()
                .map(|e| d.center.distance(e.center) + e.radius)
                .fold(d.radius, f64::max);
            Disc {
                center: d.center,
                radius: reach,
            }
        })
}

/// Solves |center - c_i| = R - r_i for i = 1..3 with R >= max r_i.
fn apollonius_inner(a: Disc, b: Disc, c: Disc) -> Option<Disc> {
    // Differences of the squared equations are linear in (x, y, R):
    //   2(xi - x1) x + 2(yi - y1) y - 2(ri - r1) R = k_i - k_1,
    //   k = x^2 + y^2 - r^2.
    let k = |d: Disc| d.center.norm_squared() - d.radius * d.radius;
    let row = |d: Disc| {
        [
            2.0 * (d.center.x - a.center.x),
            2.0 * (d.center.y - a.center.y),
            -2.0 * (d.radius - a.radius),
            k(d) - k(a),
        ]
    };
    let r1 = row(b);
    let r2 = row(c);

    // null direction of the 2x3 system
    let n = [
        r1[1] * r2[2] - r1[2] * r2[1],
        r1[2] * r2[0] - r1[0] * r2[2],
        r1[0] * r2[1] - r1[1] * r2[0],
    ];
    let nn = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    if nn == 0.0 {
        return None;
    }
    // minimum-norm particular solution: p = M^T (M M^T)^{-1} rhs
    let g11 = r1[0] * r1[0] + r1[1] * r1[1] + r1[2] * r1[2];
    let g12 = r1[0] * r2[0] + r1[1] * r2[1] + r1[2] * r2[2];
    let g22 = r2[0] * r2[0] + r2[1] * r2[1] + r2[2] * r2[2];
    let det = g11 * g22 - g12 * g12;
    if det == 0.0 {
        return None;
    }
    let w1 = (g22 * r1[3] - g12 * r2[3]) / det;
    let w2 = (g11 * r2[3] - g12 * r1[3]) / det;
    let p = [
        w1 * r1[0] + w2 * r2[0],
        w1 * r1[1] + w2 * r2[1],
        w1 * r1[2] + w2 * r2[2],
    ];

    // (p + t n) into (x - x1)^2 + (y - y1)^2 - (R - r1)^2 = 0
    let u = [p[0] - a.center.x, p[1] - a.center.y, p[2] - a.radius];
    let qa = n[0] * n[0] + n[1] * n[1] - n[2] * n[2];
    let qb = 2.0 * (u[0] * n[0] + u[1] * n[1] - u[2] * n[2]);
    let qc = u[0] * u[0] + u[1] * u[1] - u[2] * u[2];

    let roots: Vec<f64> = if qa.abs() <= 1e-14 * nn {
        if qb == 0.0 {
            return None;
        }
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            // tangency only at rounding level; take the double root
            vec![-qb / (2.0 * qa)]
        } else {
            let s = disc.sqrt();
            // numerically stable pair
            let q = -0.5 * (qb + qb.signum() * s);
            let mut v = vec![q / qa];
            if q != 0.0 {
                v.push(qc / q);
            }
            v
        }
    };

    let rmax = a.radius.max(b.radius).max(c.radius);
    roots
        .into_iter()
        .map(|t| Disc {
            center: Vec2::new(p[0] + t * n[0], p[1] + t * n[1]),
            radius: p[2] + t * n[2],
        })
        .filter(|d| d.radius.is_finite() && d.radius >= rmax - containment_slack(rmax))
        .min_by(|x, y| x.radius.total_cmp(&y.radius))
}
