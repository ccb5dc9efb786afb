//! Learning the normal-rate ladder from training counts.
//!
//! The normal rates are the centroids of a deterministic 1-D k-means on the
//! counts. The abnormal boundary rates sit `m` Poisson standard deviations
//! (`sqrt(λ)`) outside the extreme centroids, with the low rate floored at `ε`.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hmm::{RateLadder, TransitionModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub counts: Vec<u64>,
    pub source_label: String,
}

impl TrainingSet {
    pub fn new(counts: Vec<u64>, source_label: impl Into<String>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Usage("training set is empty".into()));
        }
        Ok(Self {
            counts,
            source_label: source_label.into(),
        })
    }

    /// SHA-256 of the counts as little-endian `u64`s, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for c in &self.counts {
            h.update(c.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub n_normal: usize,
    pub boundary_multiplier: f64,
    pub rate_floor: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            n_normal: 5,
            boundary_multiplier: 3.0,
            rate_floor: 1e-3,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_normal == 0 {
            return Err(Error::Config("n_normal must be at least 1".into()));
        }
        if !(self.boundary_multiplier.is_finite() && self.boundary_multiplier > 0.0) {
            return Err(Error::Config(format!(
                "boundary multiplier must be positive, got {}",
                self.boundary_multiplier
            )));
        }
        if !(self.rate_floor.is_finite() && self.rate_floor > 0.0) {
            return Err(Error::Config(format!(
                "rate floor must be positive, got {}",
                self.rate_floor
            )));
        }
        Ok(())
    }
}

/// Result of a 1-D k-means fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Sorted, distinct centroids of the non-empty clusters.
    pub centroids: Vec<f64>,
    /// Objective after every assignment/update pass.
    pub objective_trace: Vec<f64>,
    /// Assignments stopped changing.
    pub converged: bool,
}

const MAX_LLOYD_ITERATIONS: usize = 10_000;

/// Lloyd's algorithm on 1-D data, initialized at the `(c + 1/2) / k` quantiles.
/// Empty or coincident clusters are dropped, so fewer than `k` centroids may
/// come back.
pub fn kmeans_1d(data: &[u64], k: usize) -> KMeansFit {
    assert!(k >= 1 && !data.is_empty());
    let mut sorted = data.to_vec();
    sorted.sort_unstable();
    // Distinct values with multiplicities.
    let mut values: Vec<(f64, f64)> = Vec::new();
    for &v in &sorted {
        match values.last_mut() {
            Some((last, w)) if *last == v as f64 => *w += 1.0,
            _ => values.push((v as f64, 1.0)),
        }
    }
    let len = sorted.len();
    let mut centroids: Vec<f64> = (0..k)
        .map(|c| {
            let pos = (((c as f64 + 0.5) / k as f64) * len as f64).floor() as usize;
            sorted[pos.min(len - 1)] as f64
        })
        .collect();
    centroids.dedup();

    let assign = |centroids: &[f64]| -> Vec<usize> {
        values
            .iter()
            .map(|&(v, _)| {
                let mut best = 0;
                for (c, &mu) in centroids.iter().enumerate().skip(1) {
                    if (v - mu).abs() < (v - centroids[best]).abs() {
                        best = c;
                    }
                }
                best
            })
            .collect()
    };

    let mut labels = assign(&centroids);
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut sums = vec![0.0; centroids.len()];
        let mut weights = vec![0.0; centroids.len()];
        for (&(v, w), &c) in values.iter().zip(&labels) {
            sums[c] += v * w;
            weights[c] += w;
        }
        let mut next: Vec<f64> = sums
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, w)| s / w)
            .collect();
        next.dedup();
        let next_labels = assign(&next);
        let objective: f64 = values
            .iter()
            .zip(&next_labels)
            .map(|(&(v, w), &c)| w * (v - next[c]).powi(2))
            .sum();
        trace.push(objective);
        let stable = next.len() == centroids.len() && next_labels == labels;
        centroids = next;
        labels = next_labels;
        if stable {
            converged = true;
            break;
        }
    }
    KMeansFit {
        centroids,
        objective_trace: trace,
        converged,
    }
}

/// A learned ladder with the bookkeeping needed for provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedLadder {
    pub ladder: RateLadder,
    pub requested_n: usize,
    pub effective_n: usize,
    pub warnings: Vec<String>,
    pub fit: KMeansFit,
}

pub fn learn_ladder(data: &TrainingSet, cfg: &LearnerConfig) -> Result<LearnedLadder> {
    cfg.validate()?;
    if data.counts.is_empty() {
        return Err(Error::Usage("training set is empty".into()));
    }
    let fit = kmeans_1d(&data.counts, cfg.n_normal);
    let normal = &fit.centroids;
    let effective_n = normal.len();
    let mut warnings = Vec::new();
    if effective_n < cfg.n_normal {
        warnings.push(format!(
            "only {effective_n} distinct clusters found; N reduced from {}",
            cfg.n_normal
        ));
    }
    let (first, last) = (normal[0], normal[effective_n - 1]);
    let m = cfg.boundary_multiplier;
    let mut rates = Vec::with_capacity(effective_n + 2);
    rates.push((first - m * first.sqrt()).max(cfg.rate_floor));
    rates.extend_from_slice(normal);
    rates.push(last + m * last.sqrt());
    for i in 1..rates.len() {
        if rates[i] <= rates[i - 1] {
            rates[i] = rates[i - 1] + cfg.rate_floor;
        }
    }
    Ok(LearnedLadder {
        ladder: RateLadder::new(rates)?,
        requested_n: cfg.n_normal,
        effective_n,
        warnings,
        fit,
    })
}

/// Normal block with every entry `1/(N+2)`: each normal state moves to every
/// state `0..=N+1` with equal probability.
pub fn default_transition(n: usize, a_low: f64, a_high: f64) -> Result<TransitionModel> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let p = 1.0 / (n + 2) as f64;
    TransitionModel::new(vec![vec![p; n + 2]; n], a_low, a_high)
}

/// Total person counts across seven cameras: `N = 5`.
pub fn person_count_ladder() -> RateLadder {
    RateLadder::new(vec![0.001, 5.0, 10.0, 15.0, 20.0, 25.0, 65.0]).expect("valid ladder")
}

/// Total car counts across seven cameras: `N = 1`.
pub fn car_count_ladder() -> RateLadder {
    RateLadder::new(vec![0.00001, 0.001, 55.0]).expect("valid ladder")
}
