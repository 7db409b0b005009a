//! Gaussian process regression with a Matérn-5/2 ARD kernel.
//!
//! Inputs are mapped onto the unit cube and outputs are standardized before
//! any linear algebra happens, so hyperparameters always live in normalized
//! units: lengthscales are fractions of the box width, amplitude and noise
//! are variances of the standardized outputs. Posterior queries translate
//! back to raw units.

use crate::chol::Chol;
use crate::domain::{Dataset, Domain, Observation};
use crate::error::{Error, Result};
use crate::optim::{minimize_box, OptimOptions};
use crate::sampling::scrambled_halton;

const SQRT_5: f64 = 2.23606797749979;
const LN_2PI: f64 = 1.8378770664093453;

/// Fraction of the amplitude added to the covariance diagonal before the
/// first factorization attempt.
const BASE_JITTER_FRAC: f64 = 1e-8;
/// Jitter escalation gives up once the fraction exceeds this.
const MAX_JITTER_FRAC: f64 = 1e-4;
/// Raw-unit posterior variances below this are reported as exactly zero.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Matérn-5/2 ARD kernel hyperparameters plus a constant prior mean, all in
/// normalized units (unit-cube inputs, standardized outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparams {
    /// Per-dimension lengthscales, strictly positive.
    pub lengthscales: Vec<f64>,
    /// Kernel variance at distance zero, strictly positive.
    pub amplitude: f64,
    /// Observation noise variance, non-negative.
    pub noise_variance: f64,
    /// Constant prior mean of the standardized outputs.
    pub prior_mean: f64,
}

impl GpHyperparams {
    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidHyperparameters(
                "at least one lengthscale is required".into(),
            ));
        }
        if !self
            .lengthscales
            .iter()
            .all(|l| l.is_finite() && *l > 0.0)
        {
            return Err(Error::InvalidHyperparameters(format!(
                "lengthscales must be finite and positive, got {:?}",
                self.lengthscales
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidHyperparameters(format!(
                "amplitude must be finite and positive, got {}",
                self.amplitude
            )));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidHyperparameters(format!(
                "noise variance must be finite and non-negative, got {}",
                self.noise_variance
            )));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::InvalidHyperparameters(
                "prior mean must be finite".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
fn scaled_distance(a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
    let mut sq = 0.0;
    for i in 0..a.len() {
        let d = (a[i] - b[i]) / lengthscales[i];
        sq += d * d;
    }
    sq.sqrt()
}

#[inline]
fn matern52_from_distance(r: f64, amplitude: f64) -> f64 {
    let sr = SQRT_5 * r;
    amplitude * (1.0 + sr + (5.0 / 3.0) * r * r) * (-sr).exp()
}

/// Matérn-5/2 ARD kernel `k(a, b)` under the given hyperparameters.
/// Validates the hyperparameters and dimension agreement; the hot internal
/// paths skip those checks.
pub fn matern52_ard(a: &[f64], b: &[f64], hp: &GpHyperparams) -> Result<f64> {
    hp.validate()?;
    if a.len() != hp.dim() || b.len() != hp.dim() {
        return Err(Error::InvalidData(format!(
            "kernel inputs must have dimension {}, got {} and {}",
            hp.dim(),
            a.len(),
            b.len()
        )));
    }
    Ok(matern52_from_distance(
        scaled_distance(a, b, &hp.lengthscales),
        hp.amplitude,
    ))
}

/// Settings for maximum likelihood hyperparameter fitting.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Number of quasi-random multistart points in log-hyperparameter space.
    pub starts: usize,
    /// Local optimizer iteration cap per start.
    pub max_iters: usize,
    /// Lengthscale search bounds, as fractions of the unit box width.
    pub lengthscale_bounds: (f64, f64),
    /// Amplitude search bounds, in standardized output variance units.
    pub amplitude_bounds: (f64, f64),
    /// Noise variance search bounds, in standardized output variance units.
    pub noise_bounds: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iters: 60,
            lengthscale_bounds: (1e-3, 1e3),
            amplitude_bounds: (1e-4, 1e4),
            noise_bounds: (1e-8, 1.0),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::InvalidConfig("fit needs at least one start".into()));
        }
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale_bounds),
            ("amplitude", self.amplitude_bounds),
            ("noise", self.noise_bounds),
        ] {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "{name} bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

fn standardization(data: &Dataset) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 1.0);
    }
    let n = data.len() as f64;
    let mean = data.values().sum::<f64>() / n;
    let var = data.values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < 1e-12 { 1.0 } else { std })
}

/// Negative log marginal likelihood of standardized, zero-mean data under
/// log-space hyperparameters `theta = [ln l_1 .. ln l_d, ln amp, ln noise]`.
/// Returns infinity when the covariance cannot be factored.
fn nll(theta: &[f64], dim: usize, pair_sq: &[f64], ys: &[f64]) -> f64 {
    let n = ys.len();
    let inv_sq: Vec<f64> = theta[..dim].iter().map(|t| (-2.0 * t).exp()).collect();
    let amplitude = theta[dim].exp();
    let noise = theta[dim + 1].exp();
    let diag = amplitude + noise + BASE_JITTER_FRAC * amplitude;

    let mut packed = vec![0.0; n * (n + 1) / 2];
    let mut p = 0;
    for i in 0..n {
        for _j in 0..i {
            let base = p * dim;
            let mut sq = 0.0;
            for (k, inv) in inv_sq.iter().enumerate() {
                sq += pair_sq[base + k] * inv;
            }
            packed[p] = matern52_from_distance(sq.sqrt(), amplitude);
            p += 1;
        }
        packed[p] = diag;
        p += 1;
    }

    let Some(chol) = Chol::factor(&packed, n) else {
        return f64::INFINITY;
    };
    let mut alpha = ys.to_vec();
    chol.solve(&mut alpha);
    let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    0.5 * fit + chol.log_diag_sum() + 0.5 * n as f64 * LN_2PI
}

/// Fit kernel hyperparameters by maximizing the log marginal likelihood over
/// a log-space box, using quasi-random multistarts refined with projected
/// L-BFGS. The prior mean is pinned to the data mean, which is zero after
/// standardization. Deterministic given `seed`.
pub fn fit_hyperparameters(
    domain: &Domain,
    data: &Dataset,
    cfg: &FitConfig,
    seed: u64,
) -> Result<GpHyperparams> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidData("cannot fit on an empty dataset".into()));
    }
    let dim = domain.dim();
    if data.observations()[0].point.len() != dim {
        return Err(Error::InvalidData(format!(
            "data dimension {} does not match domain dimension {dim}",
            data.observations()[0].point.len()
        )));
    }

    let xn: Vec<Vec<f64>> = data.points().map(|p| domain.normalize(p)).collect();
    let (y_mean, y_scale) = standardization(data);
    let ys: Vec<f64> = data.values().map(|v| (v - y_mean) / y_scale).collect();

    let n = xn.len();
    let mut pair_sq = vec![0.0; n * (n + 1) / 2 * dim];
    let mut p = 0;
    for i in 0..n {
        for j in 0..=i {
            for k in 0..dim {
                let d = xn[i][k] - xn[j][k];
                pair_sq[p * dim + k] = d * d;
            }
            p += 1;
        }
    }

    let mut lo = vec![cfg.lengthscale_bounds.0.ln(); dim];
    let mut hi = vec![cfg.lengthscale_bounds.1.ln(); dim];
    lo.push(cfg.amplitude_bounds.0.ln());
    hi.push(cfg.amplitude_bounds.1.ln());
    lo.push(cfg.noise_bounds.0.ln());
    hi.push(cfg.noise_bounds.1.ln());

    // Starts are drawn from the plausible inner region of the search box:
    // moderate lengthscales, near-unit amplitude, small noise.
    let mut start_lo = vec![0.05f64.ln().max(lo[0]); dim];
    let mut start_hi = vec![2.0f64.ln().min(hi[0]); dim];
    start_lo.push(0.2f64.ln().max(lo[dim]));
    start_hi.push(5.0f64.ln().min(hi[dim]));
    start_lo.push(1e-6f64.ln().max(lo[dim + 1]));
    start_hi.push(1e-2f64.ln().min(hi[dim + 1]));
    for i in 0..start_lo.len() {
        if start_lo[i] >= start_hi[i] {
            start_lo[i] = lo[i];
            start_hi[i] = hi[i];
        }
    }

    let objective = |theta: &[f64]| nll(theta, dim, &pair_sq, &ys);
    let opts = OptimOptions {
        max_iters: cfg.max_iters,
        grad_step: 1e-5,
        ..OptimOptions::default()
    };

    let starts = scrambled_halton(cfg.starts, dim + 2, seed)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        let theta0: Vec<f64> = start
            .iter()
            .enumerate()
            .map(|(i, u)| start_lo[i] + u * (start_hi[i] - start_lo[i]))
            .collect();
        let (theta, value) = minimize_box(objective, &theta0, &lo, &hi, &opts);
        if value.is_finite() && best.as_ref().map_or(true, |(bv, _)| value < *bv) {
            best = Some((value, theta));
        }
    }

    let Some((_, theta)) = best else {
        return Err(Error::FitFailure(format!(
            "no hyperparameter start produced a usable covariance for n = {n}, dim = {dim}"
        )));
    };
    Ok(GpHyperparams {
        lengthscales: theta[..dim].iter().map(|t| t.exp()).collect(),
        amplitude: theta[dim].exp(),
        noise_variance: theta[dim + 1].exp(),
        prior_mean: 0.0,
    })
}

/// A fitted Gaussian process regressor over a box domain.
#[derive(Debug, Clone)]
pub struct GpModel {
    domain: Domain,
    hp: GpHyperparams,
    data: Dataset,
    x_norm: Vec<Vec<f64>>,
    y_norm: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    chol: Chol,
    alpha: Vec<f64>,
    jitter: f64,
}

impl GpModel {
    /// Fit hyperparameters on the data, then build the model.
    pub fn fit(domain: &Domain, data: &Dataset, cfg: &FitConfig, seed: u64) -> Result<Self> {
        let hp = fit_hyperparameters(domain, data, cfg, seed)?;
        Self::with_hyperparams(domain, data, hp)
    }

    /// Build a model with fixed hyperparameters. The output standardization
    /// (mean and scale) is derived from the data, and the hyperparameters are
    /// interpreted in those standardized units.
    pub fn with_hyperparams(domain: &Domain, data: &Dataset, hp: GpHyperparams) -> Result<Self> {
        hp.validate()?;
        if hp.dim() != domain.dim() {
            return Err(Error::InvalidHyperparameters(format!(
                "hyperparameter dimension {} does not match domain dimension {}",
                hp.dim(),
                domain.dim()
            )));
        }
        if let Some(first) = data.observations().first() {
            if first.point.len() != domain.dim() {
                return Err(Error::InvalidData(format!(
                    "data dimension {} does not match domain dimension {}",
                    first.point.len(),
                    domain.dim()
                )));
            }
        }
        let (y_mean, y_scale) = standardization(data);
        let mut model = Self {
            domain: domain.clone(),
            hp,
            data: data.clone(),
            x_norm: data.points().map(|p| domain.normalize(p)).collect(),
            y_norm: data.values().map(|v| (v - y_mean) / y_scale).collect(),
            y_mean,
            y_scale,
            chol: Chol::empty(),
            alpha: Vec::new(),
            jitter: 0.0,
        };
        model.refactor()?;
        Ok(model)
    }

    /// Rebuild the factorization and weights from scratch on the current
    /// dataset, keeping hyperparameters and output standardization fixed.
    pub fn rebuilt(&self) -> Result<Self> {
        let mut model = self.clone();
        model.refactor()?;
        Ok(model)
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.x_norm.len();
        if n == 0 {
            self.chol = Chol::empty();
            self.alpha.clear();
            self.jitter = BASE_JITTER_FRAC * self.hp.amplitude;
            return Ok(());
        }
        let mut packed = vec![0.0; n * (n + 1) / 2];
        let mut p = 0;
        for i in 0..n {
            for j in 0..i {
                packed[p] = self.kernel(&self.x_norm[i], &self.x_norm[j]);
                p += 1;
            }
            packed[p] = self.hp.amplitude + self.hp.noise_variance;
            p += 1;
        }
        let mut jitter = BASE_JITTER_FRAC * self.hp.amplitude;
        let max_jitter = MAX_JITTER_FRAC * self.hp.amplitude;
        loop {
            let mut jittered = packed.clone();
            let mut q = 0;
            for i in 0..n {
                q += i;
                jittered[q] += jitter;
                q += 1;
            }
            if let Some(chol) = Chol::factor(&jittered, n) {
                self.chol = chol;
                self.jitter = jitter;
                break;
            }
            jitter *= 2.0;
            if jitter > max_jitter {
                return Err(Error::Factorization(format!(
                    "covariance for n = {n} stayed indefinite up to jitter {max_jitter:.3e}"
                )));
            }
        }
        self.recompute_alpha();
        Ok(())
    }

    fn recompute_alpha(&mut self) {
        self.alpha = self
            .y_norm
            .iter()
            .map(|y| y - self.hp.prior_mean)
            .collect();
        self.chol.solve(&mut self.alpha);
    }

    #[inline]
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        matern52_from_distance(
            scaled_distance(a, b, &self.hp.lengthscales),
            self.hp.amplitude,
        )
    }

    /// Posterior mean and variance of the latent function at `x`, in raw
    /// output units. Variances are clamped to zero below a small floor.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let xn = self.domain.normalize(x);
        let n = self.x_norm.len();
        if n == 0 {
            let mean = self.y_mean + self.y_scale * self.hp.prior_mean;
            let var = self.y_scale * self.y_scale * self.hp.amplitude;
            return (mean, var);
        }
        let k: Vec<f64> = self.x_norm.iter().map(|xi| self.kernel(&xn, xi)).collect();
        let mean_std = self.hp.prior_mean
            + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let mut v = k;
        self.chol.solve_lower(&mut v);
        let var_std = (self.hp.amplitude - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);

        let mean = self.y_mean + self.y_scale * mean_std;
        let mut var = self.y_scale * self.y_scale * var_std;
        if var < VARIANCE_FLOOR {
            var = 0.0;
        }
        (mean, var)
    }

    /// A draw from the posterior at `x` using the provided standard normal
    /// variate: `mean + sqrt(var) * z`.
    pub fn sample_posterior(&self, x: &[f64], z: f64) -> f64 {
        let (mean, var) = self.posterior(x);
        mean + var.sqrt() * z
    }

    /// Return a new model conditioned on one more observation, extending the
    /// existing factorization. Falls back to a full refactorization if the
    /// extension is numerically unsound. Hyperparameters and output
    /// standardization are kept fixed.
    pub fn condition(&self, obs: &Observation) -> Result<Self> {
        let mut model = self.clone();
        model.data.push(obs.clone())?;
        let xn = self.domain.normalize(&obs.point);
        let yn = (obs.value - self.y_mean) / self.y_scale;
        let row: Vec<f64> = model.x_norm.iter().map(|xi| model.kernel(&xn, xi)).collect();
        let diag = model.hp.amplitude + model.hp.noise_variance + model.jitter;
        model.x_norm.push(xn);
        model.y_norm.push(yn);
        if model.chol.extend(&row, diag) {
            model.recompute_alpha();
            Ok(model)
        } else {
            model.refactor()?;
            Ok(model)
        }
    }

    /// Log marginal likelihood of the standardized data under the current
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.y_norm.len();
        if n == 0 {
            return 0.0;
        }
        let fit: f64 = self
            .y_norm
            .iter()
            .map(|y| y - self.hp.prior_mean)
            .zip(&self.alpha)
            .map(|(a, b)| a * b)
            .sum();
        -0.5 * fit - self.chol.log_diag_sum() - 0.5 * n as f64 * LN_2PI
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hp
    }

    /// Output standardization applied internally: `(mean, scale)`.
    pub fn output_standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    /// Diagonal jitter (standardized variance units) used by the current
    /// factorization.
    pub fn effective_jitter(&self) -> f64 {
        self.jitter
    }
}
