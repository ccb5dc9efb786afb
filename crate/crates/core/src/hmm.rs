//! Hidden rate chain, Poisson emissions and the belief filters.
//!
//! Every belief vector uses the fixed layout `(A, 0, 1, ..., N, N+1)`:
//! index 0 is the post-stop state `A`, and hidden state `s` lives at index
//! `s + 1`. States `1..=N` are the normal regimes, `0` and `N+1` the low and
//! high abnormal regimes.
//!
//! The exact filter propagates the whole vector through the continue-matrix
//! and reweights by the Poisson likelihood of the new count. When all rows of
//! the normal block are identical the posterior mass on states `0` and `N+1`
//! evolves on its own, which [`reduced_update`] and [`ReducedFilter`] exploit.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Index of the post-stop state `A` in belief vectors.
pub const STOP_INDEX: usize = 0;

const ROW_SUM_TOL: f64 = 1e-12;
const BELIEF_SUM_TOL: f64 = 1e-12;
const IDENTICAL_ROW_TOL: f64 = 1e-12;
const LN_FACTORIAL_TABLE: usize = 4096;

/// `ln(n!)` as a cumulative sum of logarithms.
pub fn ln_factorial(n: u64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = 0.0;
        t.push(acc);
        for i in 1..LN_FACTORIAL_TABLE {
            acc += (i as f64).ln();
            t.push(acc);
        }
        t
    });
    if (n as usize) < LN_FACTORIAL_TABLE {
        return table[n as usize];
    }
    let mut acc = table[LN_FACTORIAL_TABLE - 1];
    for i in LN_FACTORIAL_TABLE as u64..=n {
        acc += (i as f64).ln();
    }
    acc
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "Poisson rate must be finite and positive, got {rate}"
        )))
    }
}

#[inline]
fn ln_pmf_unchecked(rate: f64, count: u64) -> f64 {
    count as f64 * rate.ln() - rate - ln_factorial(count)
}

/// Natural log of the Poisson probability mass at `count`.
pub fn ln_poisson_pmf(rate: f64, count: u64) -> Result<f64> {
    check_rate(rate)?;
    Ok(ln_pmf_unchecked(rate, count))
}

/// `e^(-rate) rate^count / count!`, evaluated in log space.
pub fn poisson_pmf(rate: f64, count: u64) -> Result<f64> {
    ln_poisson_pmf(rate, count).map(f64::exp)
}

/// Smallest `y` with `P(Y <= y) >= 1 - tail` for `Y ~ Pois(rate)`.
pub fn poisson_upper_quantile(rate: f64, tail: f64) -> Result<u64> {
    check_rate(rate)?;
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail mass must lie in (0, 1), got {tail}"
        )));
    }
    let target = 1.0 - tail;
    let mut cdf = 0.0;
    let mut y = 0u64;
    loop {
        cdf += ln_pmf_unchecked(rate, y).exp();
        if cdf >= target {
            return Ok(y);
        }
        // Past the mode the remaining mass is below the tail long before this.
        if y as f64 > rate + 50.0 * rate.sqrt() + 1000.0 {
            return Ok(y);
        }
        y += 1;
    }
}

/// Ordered Poisson means `λ0 < λ1 < ... < λN < λ(N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateLadder {
    rates: Vec<f64>,
}

impl RateLadder {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "rate ladder needs at least 3 rates (N >= 1), got {}",
                rates.len()
            )));
        }
        for &r in &rates {
            check_rate(r)?;
        }
        if let Some(i) = rates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "rates must be strictly increasing: rate[{}] = {} >= rate[{}] = {}",
                i,
                rates[i],
                i + 1,
                rates[i + 1]
            )));
        }
        Ok(Self { rates })
    }

    /// Number of normal states `N`.
    pub fn normal_count(&self) -> usize {
        self.rates.len() - 2
    }

    /// Number of hidden rate states, `N + 2`.
    pub fn state_count(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate(&self, state: usize) -> f64 {
        self.rates[state]
    }

    pub fn low_rate(&self) -> f64 {
        self.rates[0]
    }

    pub fn high_rate(&self) -> f64 {
        self.rates[self.rates.len() - 1]
    }

    /// Log-likelihood of `count` under each hidden state `0..=N+1`.
    pub fn ln_emissions(&self, count: u64) -> Vec<f64> {
        self.rates
            .iter()
            .map(|&r| ln_pmf_unchecked(r, count))
            .collect()
    }
}

/// Normal-block transition probabilities plus the two abnormal self-loops.
///
/// `pbar` has `N` rows (source states `1..=N`) and `N + 2` columns
/// (destinations `0, 1, ..., N, N+1`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pbar: Vec<Vec<f64>>,
    a_low: f64,
    a_high: f64,
}

impl TransitionModel {
    pub fn new(pbar: Vec<Vec<f64>>, a_low: f64, a_high: f64) -> Result<Self> {
        if pbar.is_empty() {
            return Err(Error::InvalidParameter(
                "transition block needs at least one normal state".into(),
            ));
        }
        let n = pbar.len();
        for (i, row) in pbar.iter().enumerate() {
            if row.len() != n + 2 {
                return Err(Error::DimensionMismatch(format!(
                    "pbar row {} has {} entries, expected N + 2 = {}",
                    i + 1,
                    row.len(),
                    n + 2
                )));
            }
            if let Some(&p) = row.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "pbar row {} has invalid probability {p}",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "pbar row {} sums to {sum}, expected 1",
                    i + 1
                )));
            }
        }
        for (name, a) in [("a_low", a_low), ("a_high", a_high)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {a}"
                )));
            }
        }
        Ok(Self {
            pbar,
            a_low,
            a_high,
        })
    }

    pub fn normal_count(&self) -> usize {
        self.pbar.len()
    }

    pub fn pbar(&self) -> &[Vec<f64>] {
        &self.pbar
    }

    pub fn a_low(&self) -> f64 {
        self.a_low
    }

    pub fn a_high(&self) -> f64 {
        self.a_high
    }

    /// The common row of `pbar` when every row is the same.
    pub fn shared_row(&self) -> Option<&[f64]> {
        let first = &self.pbar[0];
        let same = self.pbar.iter().skip(1).all(|row| {
            row.iter()
                .zip(first)
                .all(|(a, b)| (a - b).abs() <= IDENTICAL_ROW_TOL)
        });
        same.then_some(first.as_slice())
    }

    /// Distribution of the next hidden state (over `0..=N+1`) from `state`.
    pub fn transition_row(&self, state: usize) -> Vec<f64> {
        let n = self.normal_count();
        let mut row = vec![0.0; n + 2];
        if state == 0 {
            row[0] = self.a_low;
            row[n + 1] = 1.0 - self.a_low;
        } else if state == n + 1 {
            row[0] = 1.0 - self.a_high;
            row[n + 1] = self.a_high;
        } else {
            row.copy_from_slice(&self.pbar[state - 1]);
        }
        row
    }

    /// Prior prediction `P2ᵀ π` on the full `(A, 0, ..., N+1)` layout.
    pub fn predict(&self, probs: &[f64]) -> Vec<f64> {
        let n = self.normal_count();
        debug_assert_eq!(probs.len(), n + 3);
        let low = probs[1];
        let high = probs[n + 2];
        let mut out = vec![0.0; n + 3];
        out[STOP_INDEX] = probs[STOP_INDEX];
        out[1] = self.a_low * low + (1.0 - self.a_high) * high;
        out[n + 2] = (1.0 - self.a_low) * low + self.a_high * high;
        for (i, row) in self.pbar.iter().enumerate() {
            let mass = probs[i + 2];
            if mass == 0.0 {
                continue;
            }
            for (dest, &p) in row.iter().enumerate() {
                out[dest + 1] += mass * p;
            }
        }
        out
    }
}

/// The continue-matrix `P2` on the `(A, 0, 1, ..., N, N+1)` layout.
pub fn build_p2(model: &TransitionModel, n: usize) -> Result<DMatrix<f64>> {
    if model.normal_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "transition model has N = {}, requested N = {n}",
            model.normal_count()
        )));
    }
    let dim = n + 3;
    let mut p2 = DMatrix::zeros(dim, dim);
    p2[(STOP_INDEX, STOP_INDEX)] = 1.0;
    for state in 0..n + 2 {
        for (dest, p) in model.transition_row(state).into_iter().enumerate() {
            p2[(state + 1, dest + 1)] = p;
        }
    }
    Ok(p2)
}

/// The stop-matrix `P1`: every state jumps to `A`.
pub fn build_p1(n: usize) -> DMatrix<f64> {
    let dim = n + 3;
    let mut p1 = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        p1[(row, STOP_INDEX)] = 1.0;
    }
    p1
}

/// Posterior over `(A, 0, 1, ..., N, N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 4 {
            return Err(Error::DimensionMismatch(format!(
                "belief needs N + 3 >= 4 entries, got {}",
                probs.len()
            )));
        }
        if let Some(&p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "belief entry {p} is not a probability"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > BELIEF_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "belief sums to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Uniform mass over the normal states `1..=N`.
    pub fn uniform_normal(n: usize) -> Self {
        let mut probs = vec![0.0; n + 3];
        for p in &mut probs[2..n + 2] {
            *p = 1.0 / n as f64;
        }
        Self { probs }
    }

    /// Unit mass on hidden state `state` (in `0..=N+1`).
    pub fn point_mass(n: usize, state: usize) -> Self {
        assert!(state <= n + 1, "state {state} out of range for N = {n}");
        let mut probs = vec![0.0; n + 3];
        probs[state + 1] = 1.0;
        Self { probs }
    }

    /// Full belief with the given abnormal masses; the remaining mass is spread
    /// over the normal states proportionally to `normal_weights`.
    pub fn from_reduced(rb: ReducedBelief, normal_weights: &[f64]) -> Result<Self> {
        let n = normal_weights.len();
        let total: f64 = normal_weights.iter().sum();
        if n == 0 || !(total > 0.0) || normal_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter(
                "normal weights must be nonnegative with a positive sum".into(),
            ));
        }
        let rest = rb.normal_mass();
        let mut probs = vec![0.0; n + 3];
        probs[1] = rb.q_low();
        probs[n + 2] = rb.q_high();
        for (slot, w) in probs[2..n + 2].iter_mut().zip(normal_weights) {
            *slot = rest * w / total;
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn normal_count(&self) -> usize {
        self.probs.len() - 3
    }

    /// Mass on hidden state `state` in `0..=N+1`.
    pub fn state(&self, state: usize) -> f64 {
        self.probs[state + 1]
    }

    pub fn stop_mass(&self) -> f64 {
        self.probs[STOP_INDEX]
    }

    pub fn low(&self) -> f64 {
        self.probs[1]
    }

    pub fn high(&self) -> f64 {
        self.probs[self.probs.len() - 1]
    }

    pub fn reduced(&self) -> ReducedBelief {
        let n = self.normal_count();
        ReducedBelief {
            q_low: self.low(),
            q_high: self.high(),
            q_normal: self.probs[2..n + 2].iter().sum(),
        }
    }
}

/// Posterior mass on the two abnormal states.
///
/// The normal mass is carried alongside rather than recomputed as
/// `1 - q_low - q_high`, which would lose it entirely once the abnormal
/// mass rounds to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedBelief {
    q_low: f64,
    q_high: f64,
    q_normal: f64,
}

impl ReducedBelief {
    pub fn new(q_low: f64, q_high: f64) -> Result<Self> {
        let ok = q_low.is_finite()
            && q_high.is_finite()
            && q_low >= 0.0
            && q_high >= 0.0
            && q_low + q_high <= 1.0 + BELIEF_SUM_TOL;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "reduced belief ({q_low}, {q_high}) is not a sub-probability"
            )));
        }
        Ok(Self {
            q_low,
            q_high,
            q_normal: (1.0 - q_low - q_high).max(0.0),
        })
    }

    pub fn q_low(&self) -> f64 {
        self.q_low
    }

    pub fn q_high(&self) -> f64 {
        self.q_high
    }

    pub fn sum(&self) -> f64 {
        self.q_low + self.q_high
    }

    /// Mass on the normal states.
    pub fn normal_mass(&self) -> f64 {
        self.q_normal
    }
}

fn check_dims(belief: &Belief, ladder: &RateLadder, model: &TransitionModel) -> Result<usize> {
    let n = belief.normal_count();
    if ladder.normal_count() != n || model.normal_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "belief has N = {n}, ladder N = {}, transition N = {}",
            ladder.normal_count(),
            model.normal_count()
        )));
    }
    Ok(n)
}

/// Unnormalized posterior `B_y P2ᵀ π` scaled by `exp(-shift)`, with the shift.
///
/// The emission weight of `A` is zero.
fn weighted_prediction(
    belief: &Belief,
    count: u64,
    ladder: &RateLadder,
    model: &TransitionModel,
) -> Result<(Vec<f64>, f64)> {
    check_dims(belief, ladder, model)?;
    let mut weights = model.predict(belief.probs());
    weights[STOP_INDEX] = 0.0;
    let ln_em = ladder.ln_emissions(count);
    let shift = ln_em
        .iter()
        .zip(&weights[1..])
        .filter(|(_, &w)| w > 0.0)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::DegenerateObservation { count });
    }
    for (w, l) in weights[1..].iter_mut().zip(&ln_em) {
        *w *= (l - shift).exp();
    }
    Ok((weights, shift))
}

/// One step of the belief filter under the continue control.
pub fn belief_update(
    belief: &Belief,
    count: u64,
    ladder: &RateLadder,
    model: &TransitionModel,
) -> Result<Belief> {
    let (mut weights, _) = weighted_prediction(belief, count, ladder, model)?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateObservation { count });
    }
    for w in &mut weights {
        *w = (*w / total).max(0.0);
    }
    Ok(Belief { probs: weights })
}

/// One-step predictive probability of `count`; the normalizer of [`belief_update`].
pub fn sigma(
    belief: &Belief,
    count: u64,
    ladder: &RateLadder,
    model: &TransitionModel,
) -> Result<f64> {
    let (weights, shift) = weighted_prediction(belief, count, ladder, model)?;
    let scaled: f64 = weights.iter().sum();
    if !(scaled > 0.0) {
        return Err(Error::DegenerateObservation { count });
    }
    Ok(scaled * shift.exp())
}

/// Updates only the abnormal masses, assuming every normal state shares the
/// transition row `row` (columns `0..=N+1`).
pub fn reduced_update(
    rb: ReducedBelief,
    count: u64,
    ladder: &RateLadder,
    row: &[f64],
    a_low: f64,
    a_high: f64,
) -> Result<ReducedBelief> {
    let n = ladder.normal_count();
    if row.len() != n + 2 {
        return Err(Error::DimensionMismatch(format!(
            "shared row has {} entries, expected N + 2 = {}",
            row.len(),
            n + 2
        )));
    }
    let rest = rb.normal_mass();
    let pred_low = a_low * rb.q_low + (1.0 - a_high) * rb.q_high + rest * row[0];
    let pred_high = (1.0 - a_low) * rb.q_low + a_high * rb.q_high + rest * row[n + 1];

    let ln_em = ladder.ln_emissions(count);
    let mut shift = f64::NEG_INFINITY;
    if pred_low > 0.0 {
        shift = shift.max(ln_em[0]);
    }
    if pred_high > 0.0 {
        shift = shift.max(ln_em[n + 1]);
    }
    for j in 1..=n {
        if rest * row[j] > 0.0 {
            shift = shift.max(ln_em[j]);
        }
    }
    if !shift.is_finite() {
        return Err(Error::DegenerateObservation { count });
    }
    let w_low = pred_low * (ln_em[0] - shift).exp();
    let w_high = pred_high * (ln_em[n + 1] - shift).exp();
    let w_normal: f64 = (1..=n)
        .map(|j| rest * row[j] * (ln_em[j] - shift).exp())
        .sum();
    let total = w_low + w_high + w_normal;
    if !(total > 0.0) {
        return Err(Error::DegenerateObservation { count });
    }
    Ok(ReducedBelief {
        q_low: w_low / total,
        q_high: w_high / total,
        q_normal: w_normal / total,
    })
}

/// Reduced filter with emission tables precomputed for counts `0..=y_max`.
///
/// Requires identical `pbar` rows. Used by the value-iteration solver and
/// policy rollouts, where the same counts are processed many times.
#[derive(Debug, Clone)]
pub struct ReducedFilter {
    a_low: f64,
    a_high: f64,
    to_low: f64,
    to_high: f64,
    em_low: Vec<f64>,
    em_high: Vec<f64>,
    /// `Σ_j p_j f_j(y)` over the normal states.
    em_normal: Vec<f64>,
}

impl ReducedFilter {
    pub fn new(ladder: &RateLadder, model: &TransitionModel, y_max: u64) -> Result<Self> {
        let n = ladder.normal_count();
        if model.normal_count() != n {
            return Err(Error::DimensionMismatch(format!(
                "ladder N = {n}, transition N = {}",
                model.normal_count()
            )));
        }
        let row = model.shared_row().ok_or_else(|| {
            Error::Config("reduced filter requires identical pbar rows".into())
        })?;
        let mut em_low = Vec::with_capacity(y_max as usize + 1);
        let mut em_high = Vec::with_capacity(y_max as usize + 1);
        let mut em_normal = Vec::with_capacity(y_max as usize + 1);
        for y in 0..=y_max {
            let f: Vec<f64> = ladder.ln_emissions(y).into_iter().map(f64::exp).collect();
            em_low.push(f[0]);
            em_high.push(f[n + 1]);
            em_normal.push((1..=n).map(|j| row[j] * f[j]).sum());
        }
        Ok(Self {
            a_low: model.a_low(),
            a_high: model.a_high(),
            to_low: row[0],
            to_high: row[n + 1],
            em_low,
            em_high,
            em_normal,
        })
    }

    pub fn y_max(&self) -> u64 {
        self.em_low.len() as u64 - 1
    }

    /// Posterior and predictive probability of `count`. When the predictive
    /// probability underflows to zero the belief is returned unchanged.
    #[inline]
    pub fn update(&self, q_low: f64, q_high: f64, count: u64) -> (f64, f64, f64) {
        let y = count as usize;
        let rest = (1.0 - q_low - q_high).max(0.0);
        let pred_low = self.a_low * q_low + (1.0 - self.a_high) * q_high + rest * self.to_low;
        let pred_high =
            (1.0 - self.a_low) * q_low + self.a_high * q_high + rest * self.to_high;
        let w_low = pred_low * self.em_low[y];
        let w_high = pred_high * self.em_high[y];
        let total = w_low + w_high + rest * self.em_normal[y];
        if total > 0.0 {
            (w_low / total, w_high / total, total)
        } else {
            (q_low, q_high, 0.0)
        }
    }
}
