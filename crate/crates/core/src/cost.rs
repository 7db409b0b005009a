//! Evaluation-cost models: a log-warped GP learned from observed costs, or
//! the problem's own cost function used directly.

use crate::domain::{Dataset, Domain, Observation};
use crate::error::{Error, Result};
use crate::gp::{FitConfig, GpModel};
use crate::problems::ProblemCost;

/// How evaluation costs are predicted during planning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostModelMode {
    /// GP regression on log costs, predictions are exponentiated posterior
    /// means (the median of the implied lognormal).
    Learned,
    /// The problem's true cost function.
    Analytic,
}

impl std::fmt::Display for CostModelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostModelMode::Learned => write!(f, "learned"),
            CostModelMode::Analytic => write!(f, "analytic"),
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Learned(GpModel),
    Analytic(ProblemCost),
}

/// Predicts the cost of evaluating the objective at a point, optionally
/// conditioned on the previously evaluated point for movement-style costs.
#[derive(Debug, Clone)]
pub struct CostModel {
    inner: Inner,
}

impl CostModel {
    /// Fit a GP to the logarithm of the observed costs. All costs must be
    /// strictly positive (the dataset guarantees this) and predictions are
    /// strictly positive by construction.
    pub fn fit(domain: &Domain, data: &Dataset, cfg: &FitConfig, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidData(
                "cannot fit a cost model on an empty dataset".into(),
            ));
        }
        let log_data = Dataset::from_observations(
            data.observations()
                .iter()
                .map(|o| Observation::new(o.point.clone(), o.cost.ln(), o.cost))
                .collect(),
        )?;
        let gp = GpModel::fit(domain, &log_data, cfg, seed)?;
        Ok(Self {
            inner: Inner::Learned(gp),
        })
    }

    /// Build a log-cost GP with fixed hyperparameters instead of fitting
    /// them, for callers that fall back to a previously fitted set.
    pub fn with_hyperparams(
        domain: &Domain,
        data: &Dataset,
        hp: crate::gp::GpHyperparams,
    ) -> Result<Self> {
        let log_data = Dataset::from_observations(
            data.observations()
                .iter()
                .map(|o| Observation::new(o.point.clone(), o.cost.ln(), o.cost))
                .collect(),
        )?;
        let gp = GpModel::with_hyperparams(domain, &log_data, hp)?;
        Ok(Self {
            inner: Inner::Learned(gp),
        })
    }

    /// Use a problem's true cost function directly.
    pub fn analytic(cost: ProblemCost) -> Self {
        Self {
            inner: Inner::Analytic(cost),
        }
    }

    pub fn mode(&self) -> CostModelMode {
        match &self.inner {
            Inner::Learned(_) => CostModelMode::Learned,
            Inner::Analytic(_) => CostModelMode::Analytic,
        }
    }

    /// Predicted cost of evaluating at `x`, given the previously evaluated
    /// point (used only by state-dependent analytic costs). Always positive.
    pub fn predict_from(&self, prev: Option<&[f64]>, x: &[f64]) -> f64 {
        match &self.inner {
            Inner::Learned(gp) => {
                let (mean, _) = gp.posterior(x);
                mean.exp()
            }
            Inner::Analytic(cost) => cost.evaluate(prev, x),
        }
    }

    /// Predicted cost at `x` ignoring evaluation history.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_from(None, x)
    }

    /// The underlying log-cost GP, when one was fit.
    pub fn log_cost_gp(&self) -> Option<&GpModel> {
        match &self.inner {
            Inner::Learned(gp) => Some(gp),
            Inner::Analytic(_) => None,
        }
    }
}
