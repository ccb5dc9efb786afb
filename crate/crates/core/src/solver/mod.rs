//! Value iteration for the optimal stopping problem on the reduced belief
//! coordinates `(q_low, q_high) = (π(0), π(N+1))`.
//!
//! Stopping costs `c_f (1 - q_low - q_high)` (the chance of a false alarm);
//! continuing costs `c_d (q_low + q_high)` plus the expected cost-to-go over
//! the next count. The reduction is exact when every row of the normal
//! transition block is the same, so the solver refuses other models.

mod grid;
mod structure;

pub use grid::SimplexGrid;
pub use structure::{
    check_convexity, check_threshold_in_sum, ConvexityReport, ConvexityViolation,
    ThresholdReport,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hmm::{poisson_upper_quantile, RateLadder, ReducedFilter, TransitionModel};

/// Default Poisson tail mass dropped from the observation sum.
pub const DEFAULT_TAIL_MASS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Cost of stopping while the chain is still in a normal state.
    pub false_alarm: f64,
    /// Cost per step of continuing after absorption.
    pub delay: f64,
}

impl CostModel {
    /// Zero costs are accepted; they make the stopping problem trivial.
    pub fn new(false_alarm: f64, delay: f64) -> Result<Self> {
        for (name, c) in [("c_f", false_alarm), ("c_d", delay)] {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonnegative, got {c}"
                )));
            }
        }
        Ok(Self { false_alarm, delay })
    }

    #[inline]
    pub fn stop_cost(&self, q_low: f64, q_high: f64) -> f64 {
        self.false_alarm * (1.0 - q_low - q_high).max(0.0)
    }

    /// Stop cost at grid point `k`, computed from its lattice level so the
    /// `q_low + q_high = 1` edge is exactly zero.
    #[inline]
    pub fn stop_cost_at(&self, grid: &SimplexGrid, k: usize) -> f64 {
        let m = grid.resolution();
        self.false_alarm * (m - grid.level(k)) as f64 / m as f64
    }

    #[inline]
    pub fn delay_cost(&self, q_low: f64, q_high: f64) -> f64 {
        self.delay * (q_low + q_high)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Poisson tail mass beyond the largest count in the observation sum.
    pub tail_mass: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 2000,
            tail_mass: DEFAULT_TAIL_MASS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub values: Vec<f64>,
    pub converged: bool,
    pub sup_norm_residual: f64,
    pub iterations: usize,
}

impl ValueFunction {
    /// The stop-immediately cost at every grid point.
    pub fn stop_immediately(grid: &SimplexGrid, cost: &CostModel) -> Self {
        let values = (0..grid.len()).map(|k| cost.stop_cost_at(grid, k)).collect();
        Self {
            values,
            converged: false,
            sup_norm_residual: f64::INFINITY,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stop,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actions: Vec<Action>,
}

impl Policy {
    pub fn is_stop(&self, idx: usize) -> bool {
        self.actions[idx] == Action::Stop
    }

    pub fn stop_count(&self) -> usize {
        self.actions.iter().filter(|a| **a == Action::Stop).count()
    }

    pub fn stops_everywhere(&self) -> bool {
        self.actions.iter().all(|a| *a == Action::Stop)
    }
}

/// Grid, costs and emission tables for repeated Bellman backups.
#[derive(Debug, Clone)]
pub struct BackupOperator {
    grid: SimplexGrid,
    cost: CostModel,
    filter: ReducedFilter,
}

impl BackupOperator {
    pub fn new(
        grid: &SimplexGrid,
        cost: CostModel,
        ladder: &RateLadder,
        model: &TransitionModel,
        tail_mass: f64,
    ) -> Result<Self> {
        if model.shared_row().is_none() {
            return Err(Error::Config(
                "value iteration on (q_low, q_high) requires identical pbar rows".into(),
            ));
        }
        let y_max = poisson_upper_quantile(ladder.high_rate(), tail_mass)?;
        let filter = ReducedFilter::new(ladder, model, y_max)?;
        Ok(Self {
            grid: grid.clone(),
            cost,
            filter,
        })
    }

    pub fn grid(&self) -> &SimplexGrid {
        &self.grid
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn filter(&self) -> &ReducedFilter {
        &self.filter
    }

    /// Delay cost plus expected interpolated cost-to-go after one more count.
    pub fn continue_cost(&self, values: &[f64], q_low: f64, q_high: f64) -> f64 {
        let mut expected = 0.0;
        for y in 0..=self.filter.y_max() {
            let (l, h, sigma) = self.filter.update(q_low, q_high, y);
            if sigma > 0.0 {
                expected += sigma * self.grid.interpolate(values, l, h);
            }
        }
        self.cost.delay_cost(q_low, q_high) + expected
    }

    /// Stop when stopping is no more expensive than continuing.
    pub fn decide(&self, values: &[f64], q_low: f64, q_high: f64) -> Action {
        self.decide_with(self.cost.stop_cost(q_low, q_high), values, q_low, q_high)
    }

    fn decide_with(&self, stop: f64, values: &[f64], q_low: f64, q_high: f64) -> Action {
        if stop <= self.continue_cost(values, q_low, q_high) {
            Action::Stop
        } else {
            Action::Continue
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let (l, h) = self.grid.point(k);
                let stop = self.cost.stop_cost_at(&self.grid, k);
                if stop == 0.0 {
                    return 0.0;
                }
                stop.min(self.continue_cost(values, l, h))
            })
            .collect()
    }

    pub fn policy(&self, values: &[f64]) -> Policy {
        let actions = (0..self.grid.len())
            .into_par_iter()
            .map(|k| {
                let (l, h) = self.grid.point(k);
                let stop = self.cost.stop_cost_at(&self.grid, k);
                if stop == 0.0 {
                    Action::Stop
                } else {
                    self.decide_with(stop, values, l, h)
                }
            })
            .collect();
        Policy { actions }
    }
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// One Bellman backup of `v`.
pub fn bellman_backup(
    v: &ValueFunction,
    grid: &SimplexGrid,
    cost: &CostModel,
    ladder: &RateLadder,
    model: &TransitionModel,
) -> Result<ValueFunction> {
    if v.values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "value function has {} points, grid has {}",
            v.values.len(),
            grid.len()
        )));
    }
    let op = BackupOperator::new(grid, *cost, ladder, model, DEFAULT_TAIL_MASS)?;
    let values = op.apply(&v.values);
    let residual = sup_norm_diff(&values, &v.values);
    Ok(ValueFunction {
        values,
        converged: false,
        sup_norm_residual: residual,
        iterations: v.iterations + 1,
    })
}

/// Everything produced by a solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub value: ValueFunction,
    pub policy: Policy,
    pub operator: BackupOperator,
}

/// Value iteration from the stop-immediately cost until the sup-norm change
/// drops below `tol` or `max_iter` backups have run.
pub fn value_iterate(
    grid: &SimplexGrid,
    cost: &CostModel,
    ladder: &RateLadder,
    model: &TransitionModel,
    options: &SolverOptions,
) -> Result<Solution> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {}",
            options.tol
        )));
    }
    let op = BackupOperator::new(grid, *cost, ladder, model, options.tail_mass)?;
    let mut v = ValueFunction::stop_immediately(grid, cost);
    for _ in 0..options.max_iter {
        let next = op.apply(&v.values);
        let residual = sup_norm_diff(&next, &v.values);
        v = ValueFunction {
            values: next,
            converged: residual < options.tol,
            sup_norm_residual: residual,
            iterations: v.iterations + 1,
        };
        if v.converged {
            break;
        }
    }
    let policy = op.policy(&v.values);
    Ok(Solution {
        value: v,
        policy,
        operator: op,
    })
}
