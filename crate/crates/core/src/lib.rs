//! Quickest detection of rate changes in Poisson count streams.
//!
//! A count stream is modelled as a hidden Markov chain over `N` normal rate
//! regimes that is eventually absorbed into a low-rate state `0` or a
//! high-rate state `N+1`. The detector filters the posterior over the hidden
//! state and raises an alarm when the weighted posterior mass on the two
//! abnormal states crosses a threshold. Around that core the crate ships a
//! grid value-iteration solver for the underlying stopping problem, a path
//! simulator with Monte Carlo evaluation, a k-means rate learner, and CSV
//! ingestion.
//!
//! Runnable walkthroughs live under `examples/`; the `beliefsum` binary wraps
//! the same functionality as `learn`, `detect`, `simulate`, `solve` and
//! `eval` subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod hmm;
pub mod ingest;
pub mod learner;
pub mod report;
pub mod simulator;
pub mod solver;

pub use detector::{AlarmMode, Detector, DetectorConfig, DetectorState, StatisticRecord};
pub use error::{Error, Result};
pub use hmm::{
    belief_update, build_p1, build_p2, poisson_pmf, reduced_update, sigma, Belief, RateLadder,
    ReducedBelief, ReducedFilter, TransitionModel,
};
pub use learner::{default_transition, learn_ladder, LearnerConfig, TrainingSet};
pub use simulator::{evaluate, sample_path, EvalReport, SamplePath, ScenarioConfig};
pub use solver::{
    bellman_backup, check_convexity, check_threshold_in_sum, value_iterate, CostModel, Policy,
    SimplexGrid, SolverOptions, ValueFunction,
};
