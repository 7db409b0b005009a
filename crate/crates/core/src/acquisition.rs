//! Acquisition functions and their deterministic multistart maximizer.

use crate::cost::CostModel;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::normal::{std_normal_cdf, std_normal_pdf};
use crate::optim::{minimize_box, OptimOptions};
use crate::sampling::latin_hypercube;

/// Posterior variances below this are treated as exactly zero inside the
/// expected improvement formula, matching the GP's own variance floor.
const EI_VARIANCE_FLOOR: f64 = 1e-12;

/// Tolerance within which candidate values count as tied; ties are broken
/// toward the lexicographically smallest point so that equal inputs always
/// produce the same maximizer.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

/// Which myopic acquisition to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionKind {
    /// Expected improvement over the incumbent.
    Ei,
    /// Expected improvement divided by predicted evaluation cost.
    EiPerCost,
}

/// Expected improvement of a Gaussian posterior `(mean, variance)` below the
/// incumbent `best`, for minimization:
/// `(best - mean) * Phi(z) + sigma * phi(z)` with `z = (best - mean) / sigma`.
/// Degenerate variance falls back to the limit `max(best - mean, 0)`.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let gap = best - mean;
    if variance < EI_VARIANCE_FLOOR {
        return gap.max(0.0);
    }
    let sigma = variance.sqrt();
    let z = gap / sigma;
    (gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

/// Expected improvement per unit of predicted cost. The caller is expected to
/// have floored the cost away from zero.
pub fn ei_per_unit_cost(ei: f64, cost: f64) -> f64 {
    debug_assert!(cost > 0.0, "cost must be positive, got {cost}");
    ei / cost
}

/// Closure evaluating expected improvement under `model` with incumbent
/// `best`.
pub fn ei_evaluator<'a>(model: &'a GpModel, best: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x: &[f64]| {
        let (mean, var) = model.posterior(x);
        expected_improvement(mean, var, best)
    }
}

/// Closure evaluating expected improvement per unit predicted cost. The cost
/// prediction is conditioned on `prev` for movement-style costs and floored
/// at `cost_floor` to keep the ratio bounded.
pub fn eipu_evaluator<'a>(
    model: &'a GpModel,
    cost: &'a CostModel,
    prev: Option<&'a [f64]>,
    best: f64,
    cost_floor: f64,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x: &[f64]| {
        let (mean, var) = model.posterior(x);
        let ei = expected_improvement(mean, var, best);
        let c = cost.predict_from(prev, x).max(cost_floor);
        ei_per_unit_cost(ei, c.max(f64::MIN_POSITIVE))
    }
}

/// Settings for [`maximize`]: a space-filling candidate stage followed by
/// local refinement of the best starts.
#[derive(Debug, Clone)]
pub struct MaximizerConfig {
    /// Number of Latin hypercube candidates.
    pub lhs_count: usize,
    /// Number of top candidates refined with projected L-BFGS.
    pub restarts: usize,
    /// Iteration cap for each local refinement.
    pub max_iters: usize,
    /// Seed for the candidate design.
    pub seed: u64,
}

impl MaximizerConfig {
    /// Defaults scaled to the domain dimension: `10 * dim` candidates, five
    /// refined starts.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            lhs_count: 10 * dim.max(1),
            restarts: 5,
            max_iters: 60,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lhs_count == 0 {
            return Err(Error::InvalidConfig(
                "maximizer needs at least one candidate".into(),
            ));
        }
        if self.restarts > self.lhs_count {
            return Err(Error::InvalidConfig(format!(
                "restarts ({}) cannot exceed candidate count ({})",
                self.restarts, self.lhs_count
            )));
        }
        Ok(())
    }
}

/// True when `a` precedes `b` lexicographically, comparing coordinates left
/// to right.
pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// Index of the largest value; values within [`TIE_TOLERANCE`] of the maximum
/// are tied and resolved toward the lexicographically smallest point.
pub(crate) fn argmax_with_tiebreak(points: &[Vec<f64>], values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && *v > best_value {
            best_value = *v;
            best = Some(i);
        }
    }
    let top = best?;
    let mut winner = top;
    for (i, v) in values.iter().enumerate() {
        if i != winner
            && v.is_finite()
            && best_value - *v <= TIE_TOLERANCE
            && lex_less(&points[i], &points[winner])
        {
            winner = i;
        }
    }
    Some(winner)
}

/// Maximize an acquisition over the domain: evaluate a seeded Latin hypercube
/// design, locally refine the best `restarts` candidates, and return the best
/// point seen overall, breaking near-ties lexicographically. Deterministic
/// given the config. Fails if every candidate evaluates non-finite.
pub fn maximize<F: Fn(&[f64]) -> f64>(
    acquisition: F,
    domain: &Domain,
    cfg: &MaximizerConfig,
) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let dim = domain.dim();
    let unit = latin_hypercube(cfg.lhs_count, dim, cfg.seed);

    let mut pool: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.lhs_count + cfg.restarts);
    for u in &unit {
        let x = domain.denormalize(u);
        let v = acquisition(&x);
        pool.push((x, v));
    }
    if !pool.iter().any(|(_, v)| v.is_finite()) {
        return Err(Error::MaximizationFailure(format!(
            "all {} candidates evaluated non-finite",
            cfg.lhs_count
        )));
    }

    // Rank candidate starts best-first, ties toward smaller points.
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        let va = if pool[a].1.is_finite() {
            pool[a].1
        } else {
            f64::NEG_INFINITY
        };
        let vb = if pool[b].1.is_finite() {
            pool[b].1
        } else {
            f64::NEG_INFINITY
        };
        vb.partial_cmp(&va)
            .unwrap()
            .then_with(|| {
                if lex_less(&pool[a].0, &pool[b].0) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            })
    });

    let negated = |u: &[f64]| -acquisition(&domain.denormalize(u));
    let opts = OptimOptions {
        max_iters: cfg.max_iters,
        ..OptimOptions::default()
    };
    let lo = vec![0.0; dim];
    let hi = vec![1.0; dim];
    let mut refined: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cfg.restarts);
    for &i in order.iter().take(cfg.restarts) {
        if !pool[i].1.is_finite() {
            break;
        }
        let start = &unit[i];
        let (u_opt, neg_value) = minimize_box(negated, start, &lo, &hi, &opts);
        if neg_value.is_finite() {
            refined.push((domain.denormalize(&u_opt), -neg_value));
        }
    }
    pool.extend(refined);

    let points: Vec<Vec<f64>> = pool.iter().map(|(x, _)| x.clone()).collect();
    let values: Vec<f64> = pool.iter().map(|(_, v)| *v).collect();
    let winner = argmax_with_tiebreak(&points, &values).ok_or_else(|| {
        Error::MaximizationFailure("no finite acquisition value in the pool".into())
    })?;
    Ok((points[winner].clone(), values[winner]))
}
