//! CSV and TOML writers for subcommand outputs.

use std::io::Write;

use serde::Serialize;

use crate::detector::StatisticRecord;
use crate::error::{Error, Result};
use crate::simulator::{EvalReport, SamplePath};
use crate::solver::{Action, ConvexityReport, Policy, SimplexGrid, ThresholdReport, ValueFunction};

/// Shortest round-trip form, switching to exponent notation for extreme
/// magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// `step,count,statistic,q_low,q_high`, one row per observation.
pub fn write_trajectory<W: Write>(out: W, records: &[StatisticRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "count", "statistic", "q_low", "q_high"])?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.count.to_string(),
            num(r.statistic),
            num(r.q_low),
            num(r.q_high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlarmReport {
    pub stream: String,
    pub alarmed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alarm_step: Option<u64>,
    pub threshold: f64,
    pub alpha: f64,
    pub report_sum: bool,
    pub steps: u64,
    pub mode: String,
}

impl AlarmReport {
    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

/// Several alarm reports as a TOML array of tables (`[[stream]]`).
pub fn alarm_reports_toml(reports: &[AlarmReport]) -> Result<String> {
    #[derive(Serialize)]
    struct All<'a> {
        stream: &'a [AlarmReport],
    }
    to_toml(&All { stream: reports })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    pub rates: Vec<f64>,
    pub pbar_row: Vec<f64>,
    pub a_low: f64,
    pub a_high: f64,
    pub false_alarm_cost: f64,
    pub delay_cost: f64,
    pub grid_resolution: usize,
    pub grid_points: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub iterations: usize,
    pub converged: bool,
    pub sup_norm_residual: f64,
    pub stop_points: usize,
    pub stops_everywhere: bool,
    pub convex: bool,
    pub convexity_violations: usize,
    pub threshold_in_sum: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_estimate: Option<f64>,
    pub mixed_levels: Vec<usize>,
}

impl SolverReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rates: &[f64],
        pbar_row: &[f64],
        a_low: f64,
        a_high: f64,
        cost: (f64, f64),
        grid: &SimplexGrid,
        options: &crate::solver::SolverOptions,
        value: &ValueFunction,
        policy: &Policy,
        convexity: &ConvexityReport,
        threshold: &ThresholdReport,
    ) -> Self {
        Self {
            rates: rates.to_vec(),
            pbar_row: pbar_row.to_vec(),
            a_low,
            a_high,
            false_alarm_cost: cost.0,
            delay_cost: cost.1,
            grid_resolution: grid.resolution(),
            grid_points: grid.len(),
            tol: options.tol,
            max_iter: options.max_iter,
            iterations: value.iterations,
            converged: value.converged,
            sup_norm_residual: value.sup_norm_residual,
            stop_points: policy.stop_count(),
            stops_everywhere: policy.stops_everywhere(),
            convex: convexity.convex,
            convexity_violations: convexity.violations.len(),
            threshold_in_sum: threshold.passes,
            threshold_estimate: threshold.threshold,
            mixed_levels: threshold.mixed_levels.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

/// `q_low,q_high,value,action` for every grid point.
pub fn write_policy<W: Write>(
    out: W,
    grid: &SimplexGrid,
    value: &ValueFunction,
    policy: &Policy,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q_low", "q_high", "value", "action"])?;
    for k in 0..grid.len() {
        let (l, h) = grid.point(k);
        let action = match policy.actions[k] {
            Action::Stop => "stop",
            Action::Continue => "continue",
        };
        w.write_record([
            num(l),
            num(h),
            num(value.values[k]),
            action.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `threshold,false_alarm_fraction,mean_delay,censored_count`; an empty
/// `mean_delay` means no trial detected the change.
pub fn write_eval<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "false_alarm_fraction", "mean_delay", "censored_count"])?;
    for p in &report.operating_points {
        w.write_record([
            num(p.threshold),
            num(p.false_alarm_fraction),
            p.mean_delay.map(num).unwrap_or_default(),
            p.censored.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    pub threshold: f64,
    pub alpha: f64,
    pub false_alarm_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_detection_delay: Option<f64>,
    pub censored: usize,
}

impl EvalSummary {
    pub fn new(report: &EvalReport, threshold: f64, alpha: f64) -> Self {
        Self {
            trials: report.trials,
            seed: report.seed,
            horizon: report.horizon,
            threshold,
            alpha,
            false_alarm_fraction: report.false_alarm_fraction,
            mean_detection_delay: report.mean_detection_delay,
            censored: report.censored,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

/// `timestamp,count,state` with integer timestamps `start, start + step, ...`.
pub fn write_path<W: Write>(out: W, path: &SamplePath, start: i64, step: i64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp", "count", "state"])?;
    for (k, (&y, &x)) in path.counts.iter().zip(&path.states).enumerate() {
        w.write_record([
            (start + step * k as i64).to_string(),
            y.to_string(),
            x.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
