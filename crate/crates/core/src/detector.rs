//! Streaming belief-sum change detector.
//!
//! After every count the detector updates the posterior over the hidden rate
//! state and reports `alpha * π(0) + (1 - alpha) * π(N+1)`. The alarm fires at
//! the first step where that statistic strictly exceeds the threshold. With
//! `alpha = 0.5` and `report_sum` set, the plain sum `π(0) + π(N+1)` is
//! reported (and thresholded) instead of its half.

use crate::error::{Error, Result};
use crate::hmm::{belief_update, Belief, RateLadder, TransitionModel};

/// What happens to the stream after the first threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlarmMode {
    /// Keep filtering and reporting the statistic; the alarm step stays fixed.
    #[default]
    Monitor,
    /// Stop at the alarm. Stepping an alarmed detector is an error.
    StopAtAlarm,
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub ladder: RateLadder,
    pub model: TransitionModel,
    /// Weight on the low-rate state.
    pub alpha: f64,
    pub threshold: f64,
    /// Initial belief; must put no mass on `A`, `0` or `N+1`.
    pub prior: Belief,
    pub report_sum: bool,
    pub mode: AlarmMode,
}

impl DetectorConfig {
    /// Config with a uniform prior over the normal states, monitor mode and
    /// the weighted statistic.
    pub fn new(
        ladder: RateLadder,
        model: TransitionModel,
        alpha: f64,
        threshold: f64,
    ) -> Result<Self> {
        let prior = Belief::uniform_normal(ladder.normal_count());
        let cfg = Self {
            ladder,
            model,
            alpha,
            threshold,
            prior,
            report_sum: false,
            mode: AlarmMode::Monitor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_prior(mut self, prior: Belief) -> Result<Self> {
        self.prior = prior;
        self.validate()?;
        Ok(self)
    }

    pub fn with_report_sum(mut self, report_sum: bool) -> Self {
        self.report_sum = report_sum;
        self
    }

    pub fn with_mode(mut self, mode: AlarmMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.ladder.normal_count();
        if self.model.normal_count() != n || self.prior.normal_count() != n {
            return Err(Error::Config(format!(
                "ladder has N = {n} but transition model has N = {} and prior N = {}",
                self.model.normal_count(),
                self.prior.normal_count()
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        let p = &self.prior;
        if p.stop_mass() != 0.0 || p.low() != 0.0 || p.high() != 0.0 {
            return Err(Error::Config(format!(
                "prior must put zero mass on A, 0 and N+1 (got {}, {}, {})",
                p.stop_mass(),
                p.low(),
                p.high()
            )));
        }
        Ok(())
    }

    /// True when the plain sum is reported instead of the convex combination.
    pub fn reports_sum(&self) -> bool {
        self.report_sum && self.alpha == 0.5
    }

    pub fn statistic_of(&self, q_low: f64, q_high: f64) -> f64 {
        let s = if self.reports_sum() {
            q_low + q_high
        } else {
            self.alpha * q_low + (1.0 - self.alpha) * q_high
        };
        s.clamp(0.0, 1.0)
    }

    pub fn statistic(&self, belief: &Belief) -> f64 {
        self.statistic_of(belief.low(), belief.high())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    pub belief: Belief,
    pub step: u64,
    pub alarmed: bool,
    pub alarm_step: Option<u64>,
}

/// One row of the statistic trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatisticRecord {
    pub step: u64,
    pub count: u64,
    pub statistic: f64,
    pub q_low: f64,
    pub q_high: f64,
}

pub fn init(config: &DetectorConfig) -> Result<DetectorState> {
    config.validate()?;
    Ok(DetectorState {
        belief: config.prior.clone(),
        step: 0,
        alarmed: false,
        alarm_step: None,
    })
}

/// Filters one count and applies the stopping rule.
pub fn step(
    state: &DetectorState,
    count: u64,
    config: &DetectorConfig,
) -> Result<(DetectorState, StatisticRecord)> {
    if state.alarmed && config.mode == AlarmMode::StopAtAlarm {
        return Err(Error::AlreadyAlarmed {
            alarm_step: state.alarm_step.unwrap_or(state.step),
        });
    }
    let belief = belief_update(&state.belief, count, &config.ladder, &config.model)?;
    let k = state.step + 1;
    let statistic = config.statistic(&belief);
    let crossed = !state.alarmed && statistic > config.threshold;
    let record = StatisticRecord {
        step: k,
        count,
        statistic,
        q_low: belief.low(),
        q_high: belief.high(),
    };
    let next = DetectorState {
        belief,
        step: k,
        alarmed: state.alarmed || crossed,
        alarm_step: if crossed { Some(k) } else { state.alarm_step },
    };
    Ok((next, record))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<StatisticRecord>,
    pub alarm_step: Option<u64>,
}

/// Runs a fresh detector over `counts`. In stop-at-alarm mode the trajectory
/// ends at the alarm.
pub fn run(counts: &[u64], config: &DetectorConfig) -> Result<RunOutput> {
    if counts.is_empty() {
        return Err(Error::Usage("cannot run the detector on an empty stream".into()));
    }
    let mut state = init(config)?;
    let mut records = Vec::with_capacity(counts.len());
    for &y in counts {
        let (next, rec) = step(&state, y, config)?;
        records.push(rec);
        state = next;
        if state.alarmed && config.mode == AlarmMode::StopAtAlarm {
            break;
        }
    }
    Ok(RunOutput {
        records,
        alarm_step: state.alarm_step,
    })
}

/// Owned detector for push-style streaming.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    state: DetectorState,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        let state = init(&config)?;
        Ok(Self { config, state })
    }

    pub fn observe(&mut self, count: u64) -> Result<StatisticRecord> {
        let (next, rec) = step(&self.state, count, &self.config)?;
        self.state = next;
        Ok(rec)
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn statistic(&self) -> f64 {
        self.config.statistic(&self.state.belief)
    }

    pub fn reset(&mut self) {
        self.state = DetectorState {
            belief: self.config.prior.clone(),
            step: 0,
            alarmed: false,
            alarm_step: None,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(alpha: f64, threshold: f64) -> DetectorConfig {
        let ladder = RateLadder::new(vec![0.5, 2.0, 8.0]).unwrap();
        let model = TransitionModel::new(vec![vec![0.1, 0.8, 0.1]], 1.0, 1.0).unwrap();
        DetectorConfig::new(ladder, model, alpha, threshold).unwrap()
    }

    fn person_config() -> DetectorConfig {
        let ladder =
            RateLadder::new(vec![0.001, 5.0, 10.0, 15.0, 20.0, 25.0, 65.0]).unwrap();
        let model = TransitionModel::new(vec![vec![1.0 / 7.0; 7]; 5], 1.0, 1.0).unwrap();
        DetectorConfig::new(ladder, model, 0.5, 0.8)
            .unwrap()
            .with_report_sum(true)
    }

    #[test]
    fn init_uses_uniform_normal_prior() {
        let cfg = person_config();
        let st = init(&cfg).unwrap();
        assert_eq!(st.step, 0);
        assert!(!st.alarmed);
        for s in 1..=5 {
            assert!((st.belief.state(s) - 0.2).abs() < 1e-15);
        }
        assert_eq!(cfg.statistic(&st.belief), 0.0);
    }

    #[test]
    fn prior_with_abnormal_mass_is_rejected() {
        let cfg = small_config(0.5, 0.8);
        let bad = Belief::new(vec![0.0, 0.1, 0.9, 0.0]).unwrap();
        assert!(matches!(cfg.with_prior(bad), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_alpha_and_threshold_are_rejected() {
        let ladder = RateLadder::new(vec![0.5, 2.0, 8.0]).unwrap();
        let model = TransitionModel::new(vec![vec![0.1, 0.8, 0.1]], 1.0, 1.0).unwrap();
        for (a, t) in [(1.5, 0.5), (-0.1, 0.5), (0.5, 0.0), (0.5, 1.0)] {
            assert!(DetectorConfig::new(ladder.clone(), model.clone(), a, t).is_err());
        }
    }

    #[test]
    fn high_point_mass_alarms_with_alpha_zero() {
        let cfg = small_config(0.0, 0.99);
        let st = DetectorState {
            belief: Belief::point_mass(1, 2),
            step: 0,
            alarmed: false,
            alarm_step: None,
        };
        let (next, rec) = step(&st, 8, &cfg).unwrap();
        assert_eq!(rec.statistic, 1.0);
        assert!(next.alarmed);
        assert_eq!(next.alarm_step, Some(1));
    }

    #[test]
    fn low_point_mass_is_invisible_with_alpha_zero() {
        let cfg = small_config(0.0, 0.01);
        let mut st = DetectorState {
            belief: Belief::point_mass(1, 0),
            step: 0,
            alarmed: false,
            alarm_step: None,
        };
        for y in [0, 1, 0, 3] {
            let (next, rec) = step(&st, y, &cfg).unwrap();
            assert_eq!(rec.statistic, 0.0);
            assert!(!next.alarmed);
            st = next;
        }
    }

    #[test]
    fn alpha_one_is_blind_to_high_state() {
        let cfg = small_config(1.0, 0.5);
        let b = Belief::point_mass(1, 2);
        assert_eq!(cfg.statistic(&b), 0.0);
        let b = Belief::point_mass(1, 0);
        assert_eq!(cfg.statistic(&b), 1.0);
    }

    #[test]
    fn report_sum_doubles_half_weights() {
        let cfg = small_config(0.5, 0.8).with_report_sum(true);
        let b = Belief::new(vec![0.0, 0.3, 0.2, 0.5]).unwrap();
        assert!((cfg.statistic(&b) - 0.8).abs() < 1e-15);
        let plain = small_config(0.5, 0.8);
        assert!((plain.statistic(&b) - 0.4).abs() < 1e-15);
        assert_eq!(cfg.statistic(&cfg.prior), 0.0);
    }

    #[test]
    fn stop_mode_refuses_to_step_after_alarm() {
        let cfg = small_config(0.5, 0.3).with_mode(AlarmMode::StopAtAlarm);
        let out = run(&[2, 2, 9, 12, 11, 12, 13], &cfg).unwrap();
        let k = out.alarm_step.expect("alarm");
        assert_eq!(out.records.len() as u64, k);
        let mut det = Detector::new(cfg).unwrap();
        for &y in &[2, 2, 9, 12, 11, 12, 13][..k as usize] {
            det.observe(y).unwrap();
        }
        assert!(matches!(det.observe(1), Err(Error::AlreadyAlarmed { .. })));
        det.reset();
        assert!(det.observe(1).is_ok());
    }

    #[test]
    fn monitor_mode_keeps_first_alarm() {
        let cfg = small_config(0.5, 0.3);
        let counts = [2, 2, 9, 12, 11, 1, 2, 12, 13];
        let out = run(&counts, &cfg).unwrap();
        assert_eq!(out.records.len(), counts.len());
        let first = out
            .records
            .iter()
            .find(|r| r.statistic > 0.3)
            .map(|r| r.step);
        assert_eq!(out.alarm_step, first);
    }

    #[test]
    fn empty_stream_is_a_usage_error() {
        let cfg = small_config(0.5, 0.8);
        assert!(matches!(run(&[], &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn single_count_gives_single_record() {
        let cfg = small_config(0.5, 0.8);
        let out = run(&[3], &cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].step, 1);
        assert_eq!(out.records[0].count, 3);
    }
}
