//! Numerical checks on the shape of a computed stop region.

use super::{Policy, SimplexGrid};

/// Continue points farther than this (in lattice units) inside the hull of
/// the stop points count as holes. Points closer to the hull boundary are
/// within one interpolation cell and treated as boundary ambiguity.
const HULL_MARGIN: f64 = 0.5;

/// A continue point enclosed by stop points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvexityViolation {
    /// Grid index of the enclosed continue point.
    pub point: usize,
    /// Grid indices of stop points whose hull encloses it (two when the stop
    /// set is collinear, three otherwise).
    pub witnesses: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport {
    pub convex: bool,
    pub violations: Vec<ConvexityViolation>,
}

type Lattice = (i64, i64);

fn cross(o: Lattice, a: Lattice, b: Lattice) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull without collinear points (Andrew's monotone chain).
fn convex_hull(mut pts: Vec<(Lattice, usize)>) -> Vec<(Lattice, usize)> {
    pts.sort_unstable();
    pts.dedup_by_key(|p| p.0);
    if pts.len() < 3 {
        return pts;
    }
    let half_hull = |iter: &mut dyn Iterator<Item = (Lattice, usize)>| {
        let mut chain: Vec<(Lattice, usize)> = Vec::new();
        for p in iter {
            while chain.len() >= 2
                && cross(chain[chain.len() - 2].0, chain[chain.len() - 1].0, p.0) <= 0
            {
                chain.pop();
            }
            chain.push(p);
        }
        chain.pop();
        chain
    };
    let mut hull = half_hull(&mut pts.iter().copied());
    hull.extend(half_hull(&mut pts.iter().rev().copied()));
    hull
}

/// Checks that no continue point sits strictly inside the convex hull of the
/// stop points (beyond half a grid cell from its boundary).
pub fn check_convexity(policy: &Policy, grid: &SimplexGrid) -> ConvexityReport {
    let mut stops = Vec::new();
    let mut conts = Vec::new();
    for (k, (i, j)) in grid.iter_lattice().enumerate() {
        let p = ((i as i64, j as i64), k);
        if policy.is_stop(k) {
            stops.push(p);
        } else {
            conts.push(p);
        }
    }
    let hull = convex_hull(stops);
    let mut violations = Vec::new();

    match hull.len() {
        0 | 1 => {}
        2 => {
            let (a, b) = (hull[0], hull[1]);
            for &(c, k) in &conts {
                let on_line = cross(a.0, b.0, c) == 0;
                let between = (c.0 - a.0.0) * (c.0 - b.0.0) <= 0 && (c.1 - a.0.1) * (c.1 - b.0.1) <= 0;
                if on_line && between {
                    violations.push(ConvexityViolation {
                        point: k,
                        witnesses: vec![a.1, b.1],
                    });
                }
            }
        }
        n => {
            let edge_len: Vec<f64> = (0..n)
                .map(|e| {
                    let (a, b) = (hull[e].0, hull[(e + 1) % n].0);
                    (((b.0 - a.0).pow(2) + (b.1 - a.1).pow(2)) as f64).sqrt()
                })
                .collect();
            for &(c, k) in &conts {
                let deep = (0..n).all(|e| {
                    let d = cross(hull[e].0, hull[(e + 1) % n].0, c) as f64 / edge_len[e];
                    d > HULL_MARGIN
                });
                if !deep {
                    continue;
                }
                let apex = hull[0];
                let fan = (1..n - 1)
                    .find(|&t| cross(apex.0, hull[t].0, c) >= 0 && cross(apex.0, hull[t + 1].0, c) <= 0)
                    .unwrap_or(1);
                violations.push(ConvexityViolation {
                    point: k,
                    witnesses: vec![apex.1, hull[fan].1, hull[fan + 1].1],
                });
            }
        }
    }
    ConvexityReport {
        convex: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// Actions depend on `q_low + q_high` alone and stopping happens above a
    /// single cut, allowing one mixed sum level.
    pub passes: bool,
    /// Estimated cut `A*` (midpoint between the last all-continue level and
    /// the first all-stop level, clamped to `[0, 1]`); `None` on failure.
    pub threshold: Option<f64>,
    /// Sum levels `i + j` holding both actions.
    pub mixed_levels: Vec<usize>,
}

/// Checks that the stop region is `{q_low + q_high > A*}` up to one grid level.
pub fn check_threshold_in_sum(policy: &Policy, grid: &SimplexGrid) -> ThresholdReport {
    let m = grid.resolution();
    let mut stop = vec![0usize; m + 1];
    let mut total = vec![0usize; m + 1];
    for k in 0..grid.len() {
        let level = grid.level(k);
        total[level] += 1;
        if policy.is_stop(k) {
            stop[level] += 1;
        }
    }
    let mixed_levels: Vec<usize> = (0..=m)
        .filter(|&l| stop[l] > 0 && stop[l] < total[l])
        .collect();
    let first_any = (0..=m).find(|&l| stop[l] > 0).unwrap_or(m + 1);
    let first_full = (0..=m)
        .rev()
        .take_while(|&l| stop[l] == total[l])
        .last()
        .unwrap_or(m + 1);
    let passes = first_full <= first_any + 1;
    let threshold = passes.then(|| {
        let mid = (first_any as f64 - 1.0 + first_full as f64) / (2.0 * m as f64);
        mid.clamp(0.0, 1.0)
    });
    ThresholdReport {
        passes,
        threshold,
        mixed_levels,
    }
}
