//! Bayesian optimization under a hard evaluation-cost budget.
//!
//! The crate provides Gaussian process surrogates for an expensive objective
//! and for its (positive, possibly state-dependent) evaluation cost, classic
//! acquisition functions (expected improvement and expected improvement per
//! unit cost), and a rollout acquisition that scores a candidate by simulating
//! a short horizon of a cheap-exploration base policy under the remaining
//! budget. A driver runs complete optimization loops and records histories
//! that downstream tooling can aggregate into best-value-versus-cost curves.
//!
//! Everything is deterministic given the seeds threaded through the public
//! APIs: sampling uses counter-derived seeds, maximization is multistart local
//! search with lexicographic tie-breaking, and no operation consults global
//! RNG state or wall-clock time.

pub mod acquisition;
pub mod aggregate;
mod chol;
pub mod cost;
pub mod domain;
pub mod driver;
mod error;
pub mod gp;
mod normal;
pub mod optim;
pub mod problems;
pub mod rollout;
pub mod sampling;

pub use acquisition::{
    ei_evaluator, ei_per_unit_cost, eipu_evaluator, expected_improvement, maximize,
    AcquisitionKind, MaximizerConfig,
};
pub use aggregate::{
    aggregate_curves, cost_histogram, default_grid, interpolate_history, log_bins,
    read_curve_csv, write_curve_csv, AggregateCurve,
};
pub use cost::{CostModel, CostModelMode};
pub use domain::{Dataset, Domain, Observation};
pub use driver::{
    evaluate_with_budget, run_bo, PolicyKind, PolicySpec, RunConfig, RunHistory, RunMeta,
    RunRecord,
};
pub use error::{Error, Result};
pub use gp::{fit_hyperparameters, matern52_ard, FitConfig, GpHyperparams, GpModel};
pub use problems::{
    adversarial_cost_problem, problem_by_name, ring_problem, sensor_stand_in,
    unit_cost_ring_problem, Problem, ProblemCost,
};
pub use rollout::{
    base_policy_step, qmc_draws, rollout_acquisition, rollout_candidates, select_next,
    simulate_trajectory, BoState, RolloutConfig, Trajectory, TrajectoryStep,
};
pub use sampling::{latin_hypercube, qmc_normal_matrix, scrambled_halton, seed_mix, QmcScheme};
