//! The optimization driver: runs a full budget-constrained loop for a chosen
//! policy and records every evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{ei_evaluator, eipu_evaluator, maximize, MaximizerConfig};
use crate::cost::{CostModel, CostModelMode};
use crate::domain::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::gp::{FitConfig, GpHyperparams, GpModel};
use crate::problems::Problem;
use crate::rollout::{base_policy_step, select_next, BoState, RolloutConfig};
use crate::sampling::{scrambled_halton, seed_mix, QmcScheme};

const TAG_INIT: u64 = 1;
const TAG_FIT_OBJECTIVE: u64 = 2;
const TAG_FIT_COST: u64 = 3;
const TAG_SELECT: u64 = 4;

/// The decision rule used at every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Maximize expected improvement.
    Ei,
    /// Maximize expected improvement per unit predicted cost.
    EiPu,
    /// Rollout scoring of a candidate set under the remaining budget.
    Rollout,
    /// Run the rollout's base policy directly: cycle through `horizon - 1`
    /// cost-aware steps followed by one plain EI step.
    BaseSchedule,
}

/// A policy plus the knobs its acquisition machinery needs. Counts left as
/// `None` default to `10 * dim` at run time.
#[derive(Debug, Clone)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Lookahead horizon for `Rollout` and cycle length for `BaseSchedule`.
    pub horizon: usize,
    /// Rollout samples per candidate.
    pub samples: usize,
    /// Rollout candidate count.
    pub candidate_count: Option<usize>,
    pub qmc: QmcScheme,
    /// Maximizer candidate count.
    pub lhs_count: Option<usize>,
    /// Maximizer local refinements.
    pub restarts: usize,
    /// Maximizer local iteration cap.
    pub max_iters: usize,
}

impl PolicySpec {
    fn base(kind: PolicyKind, horizon: usize) -> Self {
        Self {
            kind,
            horizon,
            samples: 32,
            candidate_count: None,
            qmc: QmcScheme::default(),
            lhs_count: None,
            restarts: 5,
            max_iters: 60,
        }
    }

    pub fn ei() -> Self {
        Self::base(PolicyKind::Ei, 1)
    }

    pub fn eipu() -> Self {
        Self::base(PolicyKind::EiPu, 1)
    }

    pub fn rollout(horizon: usize) -> Self {
        Self::base(PolicyKind::Rollout, horizon)
    }

    pub fn base_schedule(horizon: usize) -> Self {
        Self::base(PolicyKind::BaseSchedule, horizon)
    }

    /// Canonical name used in file names binning and history metadata:
    /// `ei`, `eipu`, `rollout<h>`, or `base<h>`.
    pub fn name(&self) -> String {
        match self.kind {
            PolicyKind::Ei => "ei".into(),
            PolicyKind::EiPu => "eipu".into(),
            PolicyKind::Rollout => format!("rollout{}", self.horizon),
            PolicyKind::BaseSchedule => format!("base{}", self.horizon),
        }
    }

    /// Parse a canonical policy name.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ei" => return Ok(Self::ei()),
            "eipu" => return Ok(Self::eipu()),
            _ => {}
        }
        for (prefix, ctor) in [
            ("rollout", PolicySpec::rollout as fn(usize) -> PolicySpec),
            ("base", PolicySpec::base_schedule as fn(usize) -> PolicySpec),
        ] {
            if let Some(rest) = name.strip_prefix(prefix) {
                if let Ok(h) = rest.parse::<usize>() {
                    if h >= 1 {
                        return Ok(ctor(h));
                    }
                }
            }
        }
        Err(Error::InvalidConfig(format!(
            "unknown policy '{name}'; expected ei, eipu, rollout<h>, or base<h>"
        )))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("policy horizon must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("rollout samples must be at least 1".into()));
        }
        if self.candidate_count == Some(0) || self.lhs_count == Some(0) {
            return Err(Error::InvalidConfig(
                "candidate counts must be at least 1 when given".into(),
            ));
        }
        Ok(())
    }

    fn maximizer_for(&self, dim: usize, seed: u64) -> MaximizerConfig {
        MaximizerConfig {
            lhs_count: self.lhs_count.unwrap_or(10 * dim.max(1)),
            restarts: self.restarts,
            max_iters: self.max_iters,
            seed,
        }
    }

    fn rollout_for(&self, dim: usize, seed: u64) -> RolloutConfig {
        RolloutConfig {
            horizon: self.horizon,
            samples: self.samples,
            candidate_count: self.candidate_count.unwrap_or(10 * dim.max(1)),
            qmc: self.qmc,
            seed,
        }
    }
}

/// Settings for one optimization run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Total evaluation-cost budget.
    pub tau: f64,
    pub seed: u64,
    /// Whether planning uses a learned cost model or the true cost function.
    pub cost_mode: CostModelMode,
    /// Initial design size; defaults to `2 * dim + 2`.
    pub init_points: Option<usize>,
    pub fit: FitConfig,
}

impl RunConfig {
    pub fn new(tau: f64, seed: u64) -> Self {
        Self {
            tau,
            seed,
            cost_mode: CostModelMode::Learned,
            init_points: None,
            fit: FitConfig::default(),
        }
    }
}

/// One evaluation as recorded in a run history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub cost: f64,
    pub cumulative_cost: f64,
    pub best_so_far: f64,
    /// True when this evaluation pushed the cumulative cost past the budget;
    /// it is always the last record of its run.
    pub overran: bool,
}

/// Run-level metadata, serialized as the first line of a history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub problem: String,
    pub policy: String,
    pub tau: f64,
    pub seed: u64,
    pub cost_mode: CostModelMode,
    pub init_points: usize,
    pub warnings: Vec<String>,
}

/// Everything a run produced. The canonical serialization covers metadata
/// and records only; per-decision wall-clock overhead is kept in memory for
/// reporting but never written, so files are byte-stable across machines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub meta: RunMeta,
    pub records: Vec<RunRecord>,
    /// Seconds of planning time preceding each record; zero for the initial
    /// design. Same length as `records`.
    pub overhead_secs: Vec<f64>,
}

impl RunHistory {
    /// Canonical JSONL encoding: one metadata line, then one line per record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&self.meta).expect("meta serializes"));
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parse and validate a canonical JSONL history.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let meta_line = lines.next().ok_or(Error::EmptyHistory)?;
        let meta: RunMeta = serde_json::from_str(meta_line)?;
        let mut records = Vec::new();
        for line in lines {
            records.push(serde_json::from_str::<RunRecord>(line)?);
        }
        let overhead = vec![0.0; records.len()];
        let history = Self {
            meta,
            records,
            overhead_secs: overhead,
        };
        history.validate()?;
        Ok(history)
    }

    /// Check the structural invariants every run history satisfies.
    pub fn validate(&self) -> Result<()> {
        let mut running_cost = 0.0;
        let mut running_best = f64::INFINITY;
        for (i, r) in self.records.iter().enumerate() {
            if r.iteration != i {
                return Err(Error::MalformedHistory(format!(
                    "record {i} carries iteration {}",
                    r.iteration
                )));
            }
            if !(r.cost.is_finite() && r.cost > 0.0) {
                return Err(Error::MalformedHistory(format!(
                    "record {i} has non-positive cost {}",
                    r.cost
                )));
            }
            running_cost += r.cost;
            let scale = running_cost.abs().max(1.0);
            if (r.cumulative_cost - running_cost).abs() > 1e-9 * scale {
                return Err(Error::MalformedHistory(format!(
                    "record {i} cumulative cost {} disagrees with running sum {running_cost}",
                    r.cumulative_cost
                )));
            }
            running_best = running_best.min(r.value);
            if r.best_so_far != running_best {
                return Err(Error::MalformedHistory(format!(
                    "record {i} best-so-far {} disagrees with running minimum {running_best}",
                    r.best_so_far
                )));
            }
            if r.overran && i + 1 != self.records.len() {
                return Err(Error::MalformedHistory(format!(
                    "record {i} overran but is not the final record"
                )));
            }
            if r.overran != (r.cumulative_cost > self.meta.tau) {
                return Err(Error::MalformedHistory(format!(
                    "record {i} overran flag is inconsistent with tau {}",
                    self.meta.tau
                )));
            }
        }
        Ok(())
    }

    /// Best value across all records, including an overrunning final one.
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    /// Best value over the records that fit inside the budget.
    pub fn final_best_within_budget(&self) -> Option<f64> {
        self.records
            .iter()
            .rev()
            .find(|r| !r.overran)
            .map(|r| r.best_so_far)
    }

    pub fn total_cost(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_cost)
    }

    pub fn total_overhead_secs(&self) -> f64 {
        self.overhead_secs.iter().sum()
    }
}

/// Evaluate the objective and true cost at `x`, reporting whether this
/// evaluation pushes the cumulative spend past the budget.
pub fn evaluate_with_budget(
    problem: &Problem,
    x: &[f64],
    prev: Option<&[f64]>,
    cumulative: f64,
    tau: f64,
) -> (f64, f64, bool) {
    let value = problem.objective_at(x);
    let cost = problem.cost_at(prev, x);
    (value, cost, cumulative + cost > tau)
}

fn default_hyperparams(dim: usize) -> GpHyperparams {
    GpHyperparams {
        lengthscales: vec![0.3; dim],
        amplitude: 1.0,
        noise_variance: 1e-6,
        prior_mean: 0.0,
    }
}

/// Run one complete optimization: evaluate a quasi-random initial design,
/// then repeatedly refit surrogates, plan a point with the policy, and pay
/// its true cost, stopping when the budget is spent. An evaluation that
/// overshoots the budget is recorded, flagged, and terminates the run, so a
/// history contains at most one overrun. Deterministic given the seed.
pub fn run_bo(problem: &Problem, policy: &PolicySpec, cfg: &RunConfig) -> Result<RunHistory> {
    policy.validate()?;
    if !(cfg.tau.is_finite() && cfg.tau > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "budget must be finite and positive, got {}",
            cfg.tau
        )));
    }
    let dim = problem.domain.dim();
    let init_points = cfg.init_points.unwrap_or(2 * dim + 2);
    if init_points == 0 {
        return Err(Error::InvalidConfig(
            "at least one initial design point is required".into(),
        ));
    }

    let mut history = RunHistory {
        meta: RunMeta {
            problem: problem.name.clone(),
            policy: policy.name(),
            tau: cfg.tau,
            seed: cfg.seed,
            cost_mode: cfg.cost_mode,
            init_points,
            warnings: Vec::new(),
        },
        records: Vec::new(),
        overhead_secs: Vec::new(),
    };
    let mut data = Dataset::new();
    let mut cumulative = 0.0;
    let mut best = f64::INFINITY;
    let mut prev: Option<Vec<f64>> = None;

    let init = scrambled_halton(init_points, dim, seed_mix(&[cfg.seed, TAG_INIT]))?;
    for u in &init {
        let x = problem.domain.denormalize(u);
        let (value, cost, overran) =
            evaluate_with_budget(problem, &x, prev.as_deref(), cumulative, cfg.tau);
        cumulative += cost;
        best = best.min(value);
        history.records.push(RunRecord {
            iteration: history.records.len(),
            point: x.clone(),
            value,
            cost,
            cumulative_cost: cumulative,
            best_so_far: best,
            overran,
        });
        history.overhead_secs.push(0.0);
        data.push(Observation::new(x.clone(), value, cost))?;
        prev = Some(x);
        if overran {
            history
                .meta
                .warnings
                .push("initial design exceeded the budget; run truncated".into());
            return Ok(history);
        }
    }

    let mut last_objective_hp: Option<GpHyperparams> = None;
    let mut last_cost_hp: Option<GpHyperparams> = None;

    for k in 0u64.. {
        if cumulative >= cfg.tau {
            break;
        }
        let planning_started = Instant::now();

        let objective_seed = seed_mix(&[cfg.seed, TAG_FIT_OBJECTIVE, k]);
        let objective = match GpModel::fit(&problem.domain, &data, &cfg.fit, objective_seed) {
            Ok(model) => {
                last_objective_hp = Some(model.hyperparams().clone());
                model
            }
            Err(Error::FitFailure(msg)) => {
                history.meta.warnings.push(format!(
                    "iteration {k}: objective fit failed ({msg}); reusing previous hyperparameters"
                ));
                let hp = last_objective_hp
                    .clone()
                    .unwrap_or_else(|| default_hyperparams(dim));
                GpModel::with_hyperparams(&problem.domain, &data, hp)?
            }
            Err(e) => return Err(e),
        };

        let cost_model = match cfg.cost_mode {
            CostModelMode::Analytic => CostModel::analytic(problem.cost.clone()),
            CostModelMode::Learned => {
                let cost_seed = seed_mix(&[cfg.seed, TAG_FIT_COST, k]);
                match CostModel::fit(&problem.domain, &data, &cfg.fit, cost_seed) {
                    Ok(model) => {
                        last_cost_hp = model.log_cost_gp().map(|gp| gp.hyperparams().clone());
                        model
                    }
                    Err(Error::FitFailure(msg)) => {
                        history.meta.warnings.push(format!(
                            "iteration {k}: cost fit failed ({msg}); reusing previous hyperparameters"
                        ));
                        let hp = last_cost_hp
                            .clone()
                            .unwrap_or_else(|| default_hyperparams(dim));
                        CostModel::with_hyperparams(&problem.domain, &data, hp)?
                    }
                    Err(e) => return Err(e),
                }
            }
        };

        let state = BoState::new(objective, cost_model, cfg.tau - cumulative)?
            .with_cost_floor(1e-6 * cfg.tau);
        let select_seed = seed_mix(&[cfg.seed, TAG_SELECT, k]);
        let mcfg = policy.maximizer_for(dim, seed_mix(&[select_seed, 1]));

        let point = match policy.kind {
            PolicyKind::Ei => {
                maximize(
                    ei_evaluator(&state.objective, state.best_observed),
                    &problem.domain,
                    &mcfg,
                )?
                .0
            }
            PolicyKind::EiPu => {
                maximize(
                    eipu_evaluator(
                        &state.objective,
                        &state.cost,
                        state.current.as_deref(),
                        state.best_observed,
                        state.cost_floor,
                    ),
                    &problem.domain,
                    &mcfg,
                )?
                .0
            }
            PolicyKind::Rollout => {
                let rcfg = policy.rollout_for(dim, select_seed);
                match select_next(&state, &rcfg, &mcfg) {
                    Ok(point) => point,
                    Err(Error::BudgetExhausted) => break,
                    Err(e) => return Err(e),
                }
            }
            PolicyKind::BaseSchedule => {
                let step = (k as usize) % policy.horizon;
                base_policy_step(&state, step, policy.horizon, &mcfg)?
            }
        };

        let overhead = planning_started.elapsed().as_secs_f64();
        let (value, cost, overran) =
            evaluate_with_budget(problem, &point, prev.as_deref(), cumulative, cfg.tau);
        cumulative += cost;
        best = best.min(value);
        history.records.push(RunRecord {
            iteration: history.records.len(),
            point: point.clone(),
            value,
            cost,
            cumulative_cost: cumulative,
            best_so_far: best,
            overran,
        });
        history.overhead_secs.push(overhead);
        data.push(Observation::new(point.clone(), value, cost))?;
        prev = Some(point);
        if overran {
            break;
        }
    }

    Ok(history)
}
