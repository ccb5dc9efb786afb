//! Markov-modulated Poisson count paths and Monte Carlo evaluation.
//!
//! Every trial draws from its own ChaCha8 stream (`seed`, stream = trial
//! index), so trial `i` is the same whatever the trial count or thread
//! schedule.
//!
//! Time is indexed like the detector: the hidden chain starts at `X_0` drawn
//! from the prior, and step `k >= 1` moves to `X_k` and emits `Y_k`. The
//! change point is the first step whose state is `0` or `N+1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::detector::{self, DetectorConfig};
use crate::error::{Error, Result};
use crate::hmm::{reduced_update, RateLadder, ReducedBelief, TransitionModel};
use crate::solver::{Action, BackupOperator};

/// Deterministic RNG for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn sample_categorical<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just under 1: take the last positive entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Per-state Poisson samplers.
struct Emitter {
    dists: Vec<Poisson<f64>>,
}

impl Emitter {
    fn new(ladder: &RateLadder) -> Result<Self> {
        let dists = ladder
            .rates()
            .iter()
            .map(|&r| {
                Poisson::new(r).map_err(|e| Error::InvalidParameter(format!("rate {r}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { dists })
    }

    fn emit<R: Rng + ?Sized>(&self, rng: &mut R, state: usize) -> u64 {
        self.dists[state].sample(rng) as u64
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub ladder: RateLadder,
    pub model: TransitionModel,
    /// Initial distribution over the normal states `1..=N`.
    pub prior: Vec<f64>,
    pub horizon: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Scenario with a uniform prior over the normal states.
    pub fn new(
        ladder: RateLadder,
        model: TransitionModel,
        horizon: usize,
        seed: u64,
    ) -> Result<Self> {
        let n = ladder.normal_count();
        let cfg = Self {
            ladder,
            model,
            prior: vec![1.0 / n as f64; n],
            horizon,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ladder.normal_count();
        if self.model.normal_count() != n || self.prior.len() != n {
            return Err(Error::Config(format!(
                "ladder N = {n}, transition N = {}, prior length {}",
                self.model.normal_count(),
                self.prior.len()
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let sum: f64 = self.prior.iter().sum();
        if self.prior.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "scenario prior must be a distribution over 1..=N (sum {sum})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// `X_0`, drawn from the prior.
    pub initial_state: usize,
    /// `X_1, ..., X_H`.
    pub states: Vec<usize>,
    /// `Y_1, ..., Y_H`; `counts[k]` is emitted by `states[k]`.
    pub counts: Vec<u64>,
    /// First step (1-based) in state `0` or `N+1`.
    pub change_point: Option<u64>,
}

/// Draws `X_0` from the prior, then `horizon` steps of `P2` with Poisson counts.
pub fn sample_path<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<SamplePath> {
    config.validate()?;
    let n = config.ladder.normal_count();
    let rows: Vec<Vec<f64>> = (0..n + 2).map(|s| config.model.transition_row(s)).collect();
    let emitter = Emitter::new(&config.ladder)?;
    Ok(sample_with(&rows, &emitter, &config.prior, config.horizon, n, rng))
}

fn sample_with<R: Rng + ?Sized>(
    rows: &[Vec<f64>],
    emitter: &Emitter,
    prior: &[f64],
    horizon: usize,
    n: usize,
    rng: &mut R,
) -> SamplePath {
    let initial_state = sample_categorical(rng, prior) + 1;
    let mut states = Vec::with_capacity(horizon);
    let mut counts = Vec::with_capacity(horizon);
    let mut change_point = None;
    let mut x = initial_state;
    for k in 1..=horizon {
        x = sample_categorical(rng, &rows[x]);
        if change_point.is_none() && (x == 0 || x == n + 1) {
            change_point = Some(k as u64);
        }
        states.push(x);
        counts.push(emitter.emit(rng, x));
    }
    SamplePath {
        initial_state,
        states,
        counts,
        change_point,
    }
}

/// Slots `[start, end)` (0-based) forced into an abnormal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventWindow {
    pub start: usize,
    pub end: usize,
    /// `0` (low) or `N+1` (high).
    pub state: usize,
}

/// A "day" of counts: normal regimes everywhere except an optional event.
///
/// Outside the event the hidden state moves among the normal states only,
/// using `pbar` restricted to its normal columns and renormalized.
#[derive(Debug, Clone)]
pub struct DayProfile {
    pub slots: usize,
    pub event: Option<EventWindow>,
}

pub fn sample_day<R: Rng + ?Sized>(
    ladder: &RateLadder,
    model: &TransitionModel,
    profile: &DayProfile,
    rng: &mut R,
) -> Result<SamplePath> {
    let n = ladder.normal_count();
    if model.normal_count() != n {
        return Err(Error::Config(format!(
            "ladder N = {n}, transition N = {}",
            model.normal_count()
        )));
    }
    if let Some(ev) = profile.event {
        if ev.state != 0 && ev.state != n + 1 {
            return Err(Error::Config(format!(
                "event state must be 0 or N+1 = {}, got {}",
                n + 1,
                ev.state
            )));
        }
        if ev.start >= ev.end || ev.end > profile.slots {
            return Err(Error::Config(format!(
                "event window [{}, {}) does not fit in {} slots",
                ev.start, ev.end, profile.slots
            )));
        }
    }
    // Row over normal states 1..=N, indexed from 0.
    let normal_rows: Vec<Vec<f64>> = model
        .pbar()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mass: f64 = row[1..=n].iter().sum();
            if mass > 0.0 {
                Ok(row[1..=n].iter().map(|p| p / mass).collect())
            } else {
                Err(Error::Config(format!(
                    "normal state {} has no transitions to normal states",
                    i + 1
                )))
            }
        })
        .collect::<Result<_>>()?;
    let emitter = Emitter::new(ladder)?;
    let initial_state = rng.random_range(1..=n);
    let mut x = initial_state;
    let mut states = Vec::with_capacity(profile.slots);
    let mut counts = Vec::with_capacity(profile.slots);
    for slot in 0..profile.slots {
        // The normal chain keeps running underneath the event.
        x = sample_categorical(rng, &normal_rows[x - 1]) + 1;
        let shown = match profile.event {
            Some(ev) if (ev.start..ev.end).contains(&slot) => ev.state,
            _ => x,
        };
        states.push(shown);
        counts.push(emitter.emit(rng, shown));
    }
    Ok(SamplePath {
        initial_state,
        states,
        counts,
        change_point: profile.event.map(|ev| ev.start as u64 + 1),
    })
}

/// First step at which the statistic strictly exceeds each threshold.
pub fn alarm_times(
    counts: &[u64],
    config: &DetectorConfig,
    thresholds: &[f64],
) -> Result<Vec<Option<u64>>> {
    let mut alarms = vec![None; thresholds.len()];
    let mut remaining = thresholds.len();
    let mut state = detector::init(config)?;
    let mut cfg = config.clone();
    cfg.mode = detector::AlarmMode::Monitor;
    for &y in counts {
        if remaining == 0 {
            break;
        }
        let (next, rec) = detector::step(&state, y, &cfg)?;
        state = next;
        for (slot, &t) in alarms.iter_mut().zip(thresholds) {
            if slot.is_none() && rec.statistic > t {
                *slot = Some(rec.step);
                remaining -= 1;
            }
        }
    }
    Ok(alarms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Fraction of trials alarming before the change point (or with no change
    /// inside the horizon).
    pub false_alarm_fraction: f64,
    /// Mean of `τ - τ_c` over trials alarming at or after the change point.
    pub mean_delay: Option<f64>,
    pub detections: usize,
    pub false_alarms: usize,
    /// Trials with no alarm inside the horizon.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Operating point at the detector's own threshold.
    pub false_alarm_fraction: f64,
    pub mean_detection_delay: Option<f64>,
    pub censored: usize,
    /// One entry per requested threshold, in request order.
    pub operating_points: Vec<OperatingPoint>,
}

/// Monte Carlo delay and false-alarm estimates over `trials` sampled paths.
///
/// Each threshold is scored as a stop-at-alarm detector on the same paths.
pub fn evaluate(
    scenario: &ScenarioConfig,
    det: &DetectorConfig,
    trials: usize,
    thresholds: &[f64],
) -> Result<EvalReport> {
    scenario.validate()?;
    det.validate()?;
    if trials == 0 {
        return Err(Error::Usage("trials must be at least 1".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::Usage(format!("thresholds must lie in (0, 1), got {t}")));
    }
    if scenario.ladder != det.ladder || scenario.model.normal_count() != det.model.normal_count() {
        return Err(Error::Config(
            "scenario and detector disagree on the rate ladder".into(),
        ));
    }
    let mut all = Vec::with_capacity(thresholds.len() + 1);
    all.push(det.threshold);
    all.extend_from_slice(thresholds);

    let n = scenario.ladder.normal_count();
    let rows: Vec<Vec<f64>> = (0..n + 2).map(|s| scenario.model.transition_row(s)).collect();
    let emitter = Emitter::new(&scenario.ladder)?;
    let outcomes: Vec<(Option<u64>, Vec<Option<u64>>)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(scenario.seed, trial);
            let path = sample_with(&rows, &emitter, &scenario.prior, scenario.horizon, n, &mut rng);
            alarm_times(&path.counts, det, &all).map(|a| (path.change_point, a))
        })
        .collect::<Result<_>>()?;

    let points: Vec<OperatingPoint> = all
        .iter()
        .enumerate()
        .map(|(ti, &threshold)| {
            let (mut fa, mut det_count, mut censored, mut delay_sum) = (0, 0, 0, 0.0);
            for (change, alarms) in &outcomes {
                match (alarms[ti], *change) {
                    (None, _) => censored += 1,
                    (Some(tau), Some(tc)) if tau >= tc => {
                        det_count += 1;
                        delay_sum += (tau - tc) as f64;
                    }
                    (Some(_), _) => fa += 1,
                }
            }
            OperatingPoint {
                threshold,
                false_alarm_fraction: fa as f64 / trials as f64,
                mean_delay: (det_count > 0).then(|| delay_sum / det_count as f64),
                detections: det_count,
                false_alarms: fa,
                censored,
            }
        })
        .collect();
    let own = points[0].clone();
    Ok(EvalReport {
        trials,
        seed: scenario.seed,
        horizon: scenario.horizon,
        false_alarm_fraction: own.false_alarm_fraction,
        mean_detection_delay: own.mean_delay,
        censored: own.censored,
        operating_points: points[1..].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutSummary {
    pub rollouts: usize,
    pub mean_cost: f64,
    pub std_error: f64,
    /// Rollouts cut off at the step cap before stopping.
    pub truncated: usize,
}

/// Expected realized cost of the greedy policy implied by `values`, started
/// from a belief `start` with the hidden state drawn from that belief.
///
/// Costs are charged on the true hidden state: `c_d` per continue step spent
/// in `0` or `N+1`, `c_f` when stopping in a normal state.
#[allow(clippy::too_many_arguments)]
pub fn rollout_policy(
    op: &BackupOperator,
    values: &[f64],
    ladder: &RateLadder,
    model: &TransitionModel,
    start: ReducedBelief,
    rollouts: usize,
    seed: u64,
    max_steps: usize,
) -> Result<RolloutSummary> {
    let row = model
        .shared_row()
        .ok_or_else(|| Error::Config("rollouts require identical pbar rows".into()))?
        .to_vec();
    let n = ladder.normal_count();
    let rows: Vec<Vec<f64>> = (0..n + 2).map(|s| model.transition_row(s)).collect();
    let emitter = Emitter::new(ladder)?;
    let normal_weights: Vec<f64> = {
        let w = &row[1..=n];
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter().map(|p| p / total).collect()
        } else {
            vec![1.0 / n as f64; n]
        }
    };
    let start_dist: Vec<f64> = {
        let rest = start.normal_mass();
        let mut d = vec![start.q_low()];
        d.extend(normal_weights.iter().map(|w| w * rest));
        d.push(start.q_high());
        d
    };
    let cost = *op.cost();
    let filter = op.filter();

    let samples: Vec<Result<(f64, bool)>> = (0..rollouts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = trial_rng(seed, r);
            let mut x = sample_categorical(&mut rng, &start_dist);
            let (mut ql, mut qh) = (start.q_low(), start.q_high());
            let mut total = 0.0;
            for _ in 0..max_steps {
                let abnormal = x == 0 || x == n + 1;
                if op.decide(values, ql, qh) == Action::Stop {
                    if !abnormal {
                        total += cost.false_alarm;
                    }
                    return Ok((total, false));
                }
                if abnormal {
                    total += cost.delay;
                }
                x = sample_categorical(&mut rng, &rows[x]);
                let y = emitter.emit(&mut rng, x);
                if y <= filter.y_max() {
                    let (l, h, _) = filter.update(ql, qh, y);
                    ql = l;
                    qh = h;
                } else {
                    let rb = ReducedBelief::new(ql, qh)?;
                    let next =
                        reduced_update(rb, y, ladder, &row, model.a_low(), model.a_high())?;
                    ql = next.q_low();
                    qh = next.q_high();
                }
            }
            Ok((total, true))
        })
        .collect();

    let mut costs = Vec::with_capacity(rollouts);
    let mut truncated = 0;
    for s in samples {
        let (c, cut) = s?;
        costs.push(c);
        truncated += cut as usize;
    }
    let m = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / m;
    let var = if costs.len() > 1 {
        costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(RolloutSummary {
        rollouts,
        mean_cost: mean,
        std_error: (var / m).sqrt(),
        truncated,
    })
}
