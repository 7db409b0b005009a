//! Non-myopic acquisition by rolling out a budget-aware base policy.
//!
//! A candidate point is scored by simulating what a simple cost-aware policy
//! would do for a short horizon after evaluating there: intermediate steps
//! follow the cost-sensitive acquisition (expected improvement per unit
//! cost), the final step follows plain expected improvement, fantasy outcomes
//! are drawn from the running GP posterior, and any step whose predicted cost
//! would break the remaining budget truncates the trajectory. Intermediate
//! steps earn the realized improvement of their fantasy outcome; the final
//! step of a full-horizon trajectory earns its expected improvement under the
//! running posterior, which has the same mean but no sampling noise, so a
//! one-step rollout scores a point by exactly its expected improvement. The
//! score is the average cumulative improvement over a shared matrix of
//! quasi-Monte Carlo draws, so candidates are compared under common random
//! numbers.

use crate::acquisition::{
    argmax_with_tiebreak, ei_evaluator, eipu_evaluator, expected_improvement, maximize,
    MaximizerConfig,
};
use crate::cost::CostModel;
use crate::domain::Observation;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::sampling::{latin_hypercube, qmc_normal_matrix, seed_mix, QmcScheme};

const TAG_DRAWS: u64 = 0x44524157;
const TAG_CANDIDATES: u64 = 0x43414e44;

/// Settings for rollout scoring.
#[derive(Debug, Clone)]
pub struct RolloutConfig {
    /// Lookahead horizon, at least one step.
    pub horizon: usize,
    /// Number of quasi-Monte Carlo rollouts averaged per candidate.
    pub samples: usize,
    /// Number of Latin hypercube candidates scored by [`select_next`], on
    /// top of the two myopic maximizers that are always included.
    pub candidate_count: usize,
    /// Scheme for the shared normal draw matrix.
    pub qmc: QmcScheme,
    /// Seed for draws and candidate generation.
    pub seed: u64,
}

impl RolloutConfig {
    /// Defaults for a given horizon and domain dimension: 32 rollout samples
    /// and `10 * dim` candidates.
    pub fn new(horizon: usize, dim: usize) -> Self {
        Self {
            horizon,
            samples: 32,
            candidate_count: 10 * dim.max(1),
            qmc: QmcScheme::default(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig(
                "rollout needs at least one sample".into(),
            ));
        }
        if self.candidate_count == 0 {
            return Err(Error::InvalidConfig(
                "rollout needs at least one candidate".into(),
            ));
        }
        Ok(())
    }
}

/// Snapshot of an optimization run from the planner's point of view: fitted
/// surrogates, the remaining budget, the incumbent, and the location of the
/// most recent evaluation (for movement-style costs).
#[derive(Debug, Clone)]
pub struct BoState {
    pub objective: GpModel,
    pub cost: CostModel,
    pub remaining_budget: f64,
    pub best_observed: f64,
    /// Most recently evaluated point, if any.
    pub current: Option<Vec<f64>>,
    /// Floor applied to predicted costs inside cost-ratio acquisitions.
    pub cost_floor: f64,
}

impl BoState {
    /// Build a state from a fitted objective model (whose dataset must be
    /// non-empty), a cost model, and the remaining budget.
    pub fn new(objective: GpModel, cost: CostModel, remaining_budget: f64) -> Result<Self> {
        if !remaining_budget.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "remaining budget must be finite, got {remaining_budget}"
            )));
        }
        let best_observed = objective.data().best_value().ok_or_else(|| {
            Error::InvalidData("state requires at least one observation".into())
        })?;
        let current = objective.data().last().map(|o| o.point.clone());
        Ok(Self {
            objective,
            cost,
            remaining_budget,
            best_observed,
            current,
            cost_floor: 0.0,
        })
    }

    pub fn with_cost_floor(mut self, floor: f64) -> Self {
        self.cost_floor = floor.max(0.0);
        self
    }
}

/// One simulated evaluation inside a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub point: Vec<f64>,
    /// Fantasy objective value drawn from the running posterior.
    pub value: f64,
    /// Predicted evaluation cost.
    pub cost: f64,
}

/// A simulated trajectory: the steps that fit in the budget and the total
/// improvement reward they collected. A truncated trajectory simply has
/// fewer steps; standing still earns nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub reward: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.cost).sum()
    }
}

/// The base policy's choice at step `step` of `horizon`: maximize expected
/// improvement per unit cost on intermediate steps, plain expected
/// improvement on the final step.
pub fn base_policy_step(
    state: &BoState,
    step: usize,
    horizon: usize,
    mcfg: &MaximizerConfig,
) -> Result<Vec<f64>> {
    if horizon == 0 || step >= horizon {
        return Err(Error::InvalidConfig(format!(
            "step {step} is outside horizon {horizon}"
        )));
    }
    let domain = state.objective.domain();
    let point = if step + 1 == horizon {
        maximize(
            ei_evaluator(&state.objective, state.best_observed),
            domain,
            mcfg,
        )?
        .0
    } else {
        maximize(
            eipu_evaluator(
                &state.objective,
                &state.cost,
                state.current.as_deref(),
                state.best_observed,
                state.cost_floor,
            ),
            domain,
            mcfg,
        )?
        .0
    };
    Ok(point)
}

/// Simulate one rollout of the base policy that starts by evaluating
/// `first_point`, using `draws[t]` as the standard normal variate for the
/// fantasy outcome at step `t`. Steps whose predicted cost would make the
/// cumulative spend reach the remaining budget are cut off, ending the
/// trajectory early. The reward is the summed positive improvement over the
/// running incumbent, except that the last step of a full-horizon trajectory
/// contributes its closed-form expected improvement instead of a sampled
/// one; truncated trajectories never reach that step, so a trajectory under
/// a tighter budget is a strict prefix with identical per-step rewards.
pub fn simulate_trajectory(
    state: &BoState,
    first_point: &[f64],
    cfg: &RolloutConfig,
    mcfg: &MaximizerConfig,
    draws: &[f64],
) -> Result<Trajectory> {
    cfg.validate()?;
    if draws.len() < cfg.horizon {
        return Err(Error::InvalidConfig(format!(
            "need {} draws for the horizon, got {}",
            cfg.horizon,
            draws.len()
        )));
    }
    if first_point.len() != state.objective.domain().dim() {
        return Err(Error::InvalidData(format!(
            "first point has dimension {}, domain has {}",
            first_point.len(),
            state.objective.domain().dim()
        )));
    }

    let mut sim = state.clone();
    let mut spent = 0.0;
    let mut reward = 0.0;
    let mut steps = Vec::with_capacity(cfg.horizon);

    for t in 0..cfg.horizon {
        let point = if t == 0 {
            first_point.to_vec()
        } else {
            base_policy_step(&sim, t, cfg.horizon, mcfg)?
        };
        let cost = sim.cost.predict_from(sim.current.as_deref(), &point);
        if !(spent + cost < state.remaining_budget) {
            break;
        }
        let value = sim.objective.sample_posterior(&point, draws[t]);
        if t + 1 == cfg.horizon {
            let (mean, variance) = sim.objective.posterior(&point);
            reward += expected_improvement(mean, variance, sim.best_observed);
        } else {
            reward += (sim.best_observed - value).max(0.0);
        }
        spent += cost;
        steps.push(TrajectoryStep {
            point: point.clone(),
            value,
            cost,
        });
        sim.best_observed = sim.best_observed.min(value);
        if t + 1 < cfg.horizon {
            sim.objective = sim
                .objective
                .condition(&Observation::new(point.clone(), value, cost))?;
            sim.current = Some(point);
        }
    }

    Ok(Trajectory { steps, reward })
}

/// The shared standard normal draw matrix (`samples` rows of `horizon`
/// values) used to score every candidate under common random numbers.
pub fn qmc_draws(cfg: &RolloutConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    qmc_normal_matrix(
        cfg.samples,
        cfg.horizon,
        cfg.qmc,
        seed_mix(&[cfg.seed, TAG_DRAWS]),
    )
}

/// Rollout score of a single candidate: the average trajectory reward across
/// the shared draw matrix.
pub fn rollout_acquisition(
    state: &BoState,
    candidate: &[f64],
    cfg: &RolloutConfig,
    mcfg: &MaximizerConfig,
) -> Result<f64> {
    let draws = qmc_draws(cfg)?;
    let mut total = 0.0;
    for row in &draws {
        total += simulate_trajectory(state, candidate, cfg, mcfg, row)?.reward;
    }
    Ok(total / draws.len() as f64)
}

/// The candidate set scored by [`select_next`]: a seeded Latin hypercube
/// design over the domain plus the current maximizers of expected improvement
/// and of expected improvement per unit cost.
pub fn rollout_candidates(
    state: &BoState,
    cfg: &RolloutConfig,
    mcfg: &MaximizerConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let domain = state.objective.domain();
    let dim = domain.dim();
    let mut candidates: Vec<Vec<f64>> = latin_hypercube(
        cfg.candidate_count,
        dim,
        seed_mix(&[cfg.seed, TAG_CANDIDATES]),
    )
    .into_iter()
    .map(|u| domain.denormalize(&u))
    .collect();

    let (ei_point, _) = maximize(
        ei_evaluator(&state.objective, state.best_observed),
        domain,
        mcfg,
    )?;
    let (eipu_point, _) = maximize(
        eipu_evaluator(
            &state.objective,
            &state.cost,
            state.current.as_deref(),
            state.best_observed,
            state.cost_floor,
        ),
        domain,
        mcfg,
    )?;
    if eipu_point != ei_point {
        candidates.push(eipu_point);
    }
    candidates.push(ei_point);
    Ok(candidates)
}

/// Pick the next point to evaluate: score every budget-feasible candidate by
/// its average rollout reward under the shared draws and return the best,
/// breaking near-ties toward the lexicographically smallest point. Fails with
/// [`Error::BudgetExhausted`] when no candidate's predicted cost fits in the
/// remaining budget.
pub fn select_next(
    state: &BoState,
    cfg: &RolloutConfig,
    mcfg: &MaximizerConfig,
) -> Result<Vec<f64>> {
    let candidates = rollout_candidates(state, cfg, mcfg)?;
    let feasible: Vec<Vec<f64>> = candidates
        .into_iter()
        .filter(|x| {
            state.cost.predict_from(state.current.as_deref(), x) < state.remaining_budget
        })
        .collect();
    if feasible.is_empty() {
        return Err(Error::BudgetExhausted);
    }

    let draws = qmc_draws(cfg)?;
    let mut scores = Vec::with_capacity(feasible.len());
    for candidate in &feasible {
        let mut total = 0.0;
        for row in &draws {
            total += simulate_trajectory(state, candidate, cfg, mcfg, row)?.reward;
        }
        scores.push(total / draws.len() as f64);
    }

    let winner = argmax_with_tiebreak(&feasible, &scores)
        .ok_or_else(|| Error::MaximizationFailure("no finite rollout score".into()))?;
    Ok(feasible[winner].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Dataset, Domain};
    use crate::gp::GpHyperparams;
    use crate::problems::ProblemCost;
    use std::sync::Arc;

    fn test_state(remaining: f64, unit_cost: f64) -> BoState {
        let domain = Domain::unit(1);
        let data = Dataset::from_observations(vec![
            Observation::new(vec![0.15], 0.4, unit_cost),
            Observation::new(vec![0.5], -0.2, unit_cost),
            Observation::new(vec![0.85], 0.9, unit_cost),
        ])
        .unwrap();
        let hp = GpHyperparams {
            lengthscales: vec![0.25],
            amplitude: 1.0,
            noise_variance: 1e-6,
            prior_mean: 0.0,
        };
        let gp = GpModel::with_hyperparams(&domain, &data, hp).unwrap();
        let cost = CostModel::analytic(ProblemCost::stateless(Arc::new(move |_: &[f64]| {
            unit_cost
        })));
        BoState::new(gp, cost, remaining).unwrap()
    }

    #[test]
    fn state_requires_observations() {
        let domain = Domain::unit(1);
        let hp = GpHyperparams {
            lengthscales: vec![0.3],
            amplitude: 1.0,
            noise_variance: 0.0,
            prior_mean: 0.0,
        };
        let gp = GpModel::with_hyperparams(&domain, &Dataset::new(), hp).unwrap();
        let cost = CostModel::analytic(ProblemCost::stateless(Arc::new(|_: &[f64]| 1.0)));
        assert!(BoState::new(gp, cost, 10.0).is_err());
    }

    #[test]
    fn zero_budget_yields_empty_trajectory() {
        let state = test_state(0.0, 1.0);
        let cfg = RolloutConfig::new(3, 1);
        let mcfg = MaximizerConfig::for_dim(1);
        let traj = simulate_trajectory(&state, &[0.3], &cfg, &mcfg, &[0.0, 0.0, 0.0]).unwrap();
        assert!(traj.is_empty());
        assert_eq!(traj.reward, 0.0);
    }

    #[test]
    fn infeasible_first_step_truncates_immediately() {
        let state = test_state(1.5, 2.0);
        let cfg = RolloutConfig::new(2, 1);
        let mcfg = MaximizerConfig::for_dim(1);
        let traj = simulate_trajectory(&state, &[0.3], &cfg, &mcfg, &[1.0, -1.0]).unwrap();
        assert!(traj.is_empty());
        assert_eq!(traj.reward, 0.0);
    }

    #[test]
    fn trajectory_spend_stays_under_budget() {
        let state = test_state(2.5, 1.0);
        let cfg = RolloutConfig::new(4, 1);
        let mcfg = MaximizerConfig::for_dim(1);
        let draws = [0.3, -0.8, 1.2, 0.1];
        let traj = simulate_trajectory(&state, &[0.25], &cfg, &mcfg, &draws).unwrap();
        assert_eq!(traj.len(), 2, "two unit-cost steps fit strictly under 2.5");
        assert!(traj.total_cost() < state.remaining_budget);
    }

    #[test]
    fn reward_matches_replay_of_recorded_steps() {
        let state = test_state(10.0, 1.0);
        let cfg = RolloutConfig::new(3, 1);
        let mcfg = MaximizerConfig::for_dim(1);
        let draws = [0.7, -0.4, 0.2];
        let traj = simulate_trajectory(&state, &[0.3], &cfg, &mcfg, &draws).unwrap();
        assert_eq!(traj.len(), cfg.horizon, "budget 10 fits the full horizon");
        let mut model = state.objective.clone();
        let mut incumbent = state.best_observed;
        let mut reward = 0.0;
        for (t, step) in traj.steps.iter().enumerate() {
            if t + 1 == cfg.horizon {
                let (mean, var) = model.posterior(&step.point);
                reward += expected_improvement(mean, var, incumbent);
            } else {
                reward += (incumbent - step.value).max(0.0);
                model = model
                    .condition(&Observation::new(step.point.clone(), step.value, step.cost))
                    .unwrap();
            }
            incumbent = incumbent.min(step.value);
        }
        assert!((traj.reward - reward).abs() < 1e-15);
    }

    #[test]
    fn uniform_cost_base_policy_matches_ei_at_intermediate_steps() {
        let state = test_state(10.0, 1.0);
        let mcfg = MaximizerConfig::for_dim(1).with_seed(5);
        let intermediate = base_policy_step(&state, 0, 3, &mcfg).unwrap();
        let final_step = base_policy_step(&state, 2, 3, &mcfg).unwrap();
        let (ei_point, _) = maximize(
            ei_evaluator(&state.objective, state.best_observed),
            state.objective.domain(),
            &mcfg,
        )
        .unwrap();
        assert_eq!(intermediate, ei_point);
        assert_eq!(final_step, ei_point);
    }

    #[test]
    fn base_policy_step_validates_horizon() {
        let state = test_state(10.0, 1.0);
        let mcfg = MaximizerConfig::for_dim(1);
        assert!(base_policy_step(&state, 0, 0, &mcfg).is_err());
        assert!(base_policy_step(&state, 2, 2, &mcfg).is_err());
    }

    #[test]
    fn select_next_is_deterministic_and_feasible() {
        let state = test_state(5.0, 1.0);
        let cfg = RolloutConfig::new(2, 1).with_seed(21);
        let mcfg = MaximizerConfig::for_dim(1).with_seed(22);
        let a = select_next(&state, &cfg, &mcfg).unwrap();
        let b = select_next(&state, &cfg, &mcfg).unwrap();
        assert_eq!(a, b);
        assert!(state.cost.predict(&a) < state.remaining_budget);
    }

    #[test]
    fn select_next_errors_when_nothing_fits() {
        let state = test_state(0.5, 1.0);
        let cfg = RolloutConfig::new(2, 1);
        let mcfg = MaximizerConfig::for_dim(1);
        assert!(matches!(
            select_next(&state, &cfg, &mcfg),
            Err(Error::BudgetExhausted)
        ));
    }

    #[test]
    fn candidate_set_contains_both_myopic_maximizers() {
        let state = test_state(5.0, 1.0);
        let cfg = RolloutConfig::new(2, 1).with_seed(3);
        let mcfg = MaximizerConfig::for_dim(1).with_seed(4);
        let candidates = rollout_candidates(&state, &cfg, &mcfg).unwrap();
        assert!(candidates.len() >= cfg.candidate_count + 1);
        let (ei_point, _) = maximize(
            ei_evaluator(&state.objective, state.best_observed),
            state.objective.domain(),
            &mcfg,
        )
        .unwrap();
        assert!(candidates.iter().any(|c| c == &ei_point));
    }

    #[test]
    fn draws_are_shared_and_deterministic() {
        let cfg = RolloutConfig::new(3, 2).with_seed(77);
        let a = qmc_draws(&cfg).unwrap();
        let b = qmc_draws(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.samples);
        assert!(a.iter().all(|row| row.len() == cfg.horizon));
    }

    #[test]
    fn config_validation() {
        let mut cfg = RolloutConfig::new(1, 1);
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());
        cfg = RolloutConfig::new(1, 1);
        cfg.samples = 0;
        assert!(cfg.validate().is_err());
        cfg = RolloutConfig::new(1, 1);
        cfg.candidate_count = 0;
        assert!(cfg.validate().is_err());
    }
}
