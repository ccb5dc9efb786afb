//! Reference implementations used as oracles by the integration tests.
//!
//! Nothing here calls into the crate's filtering code: matrices are built entry
//! by entry and Poisson probabilities come from `statrs`.
#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{Discrete, Poisson};

pub fn pois(rate: f64, y: u64) -> f64 {
    Poisson::new(rate).unwrap().pmf(y)
}

/// Continue-control transition matrix over `(A, 0, 1..N, N+1)`.
pub fn dense_p2(pbar: &[Vec<f64>], a_low: f64, a_high: f64) -> Vec<Vec<f64>> {
    let n = pbar.len();
    let d = n + 3;
    let mut p = vec![vec![0.0; d]; d];
    p[0][0] = 1.0;
    p[1][1] = a_low;
    p[1][n + 2] = 1.0 - a_low;
    for (i, row) in pbar.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            p[i + 2][j + 1] = v;
        }
    }
    p[n + 2][1] = 1.0 - a_high;
    p[n + 2][n + 2] = a_high;
    p
}

/// `π' ∝ diag(f(y)) P2ᵀ π` with no emission from `A`.
pub fn dense_filter(pi: &[f64], y: u64, rates: &[f64], p2: &[Vec<f64>]) -> Vec<f64> {
    let d = pi.len();
    let mut out = vec![0.0; d];
    for j in 1..d {
        let pred: f64 = (0..d).map(|i| pi[i] * p2[i][j]).sum();
        out[j] = pred * pois(rates[j - 1], y);
    }
    let total: f64 = out.iter().sum();
    out.iter().map(|v| v / total).collect()
}

/// Two-state change detection. `masses` holds the posterior `(before, after)`
/// the change, `rho` is the per-step change probability. Both masses are kept
/// so a posterior near one does not lose its complement.
pub fn shiryaev(masses: (f64, f64), y: u64, rho: f64, rate_before: f64, rate_after: f64) -> (f64, f64) {
    let (before, after) = masses;
    let b = before * (1.0 - rho) * pois(rate_before, y);
    let a = (after + before * rho) * pois(rate_after, y);
    (b / (a + b), a / (a + b))
}

/// Sums `(t_ms, count)` rows into `[t0 + b w, t0 + (b+1) w)` for every bin that
/// ends no later than the last row plus the smallest positive row gap.
pub fn rebin(rows: &[(i64, u64)], width_ms: i64) -> Vec<u64> {
    let t0 = rows[0].0;
    let last = rows[rows.len() - 1].0;
    let mut gap = i64::MAX;
    for w in rows.windows(2) {
        if w[1].0 > w[0].0 {
            gap = gap.min(w[1].0 - w[0].0);
        }
    }
    if gap == i64::MAX {
        gap = width_ms;
    }
    let mut bins = Vec::new();
    let mut b = 0;
    while t0 + (b + 1) * width_ms <= last + gap {
        let lo = t0 + b * width_ms;
        let hi = lo + width_ms;
        bins.push(rows.iter().filter(|r| r.0 >= lo && r.0 < hi).map(|r| r.1).sum());
        b += 1;
    }
    bins
}

/// A random point of the probability simplex of dimension `d`.
pub fn random_simplex<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// Strictly increasing ladder of `n + 2` rates in `(0.2, 60)`.
pub fn random_ladder<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut rates = Vec::with_capacity(n + 2);
    let mut r: f64 = rng.random_range(0.2..3.0);
    for _ in 0..n + 2 {
        rates.push(r);
        r += rng.random_range(0.5..10.0);
    }
    rates
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
