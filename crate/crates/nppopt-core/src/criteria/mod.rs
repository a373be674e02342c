//! Optimal beta priors for the discounting parameter under two criteria:
//! Kullback-Leibler divergence to target distributions and Monte Carlo mean
//! squared error of the posterior mean.

mod compare;
mod kl;
mod mse;

pub use compare::{
    compare_estimators, robust_mixture_posterior_mean, sweep_mse_vs_prior_mean, CompareConfig,
    CompareRow, EstimatorKind, SweepConfig, SweepRow,
};
pub use kl::{derive_optimal_kl, derive_optimal_kl_fixed, kl_divergence, kl_objective, FixedShape};
pub use mse::{
    derive_optimal_mse, mse_objective, mse_of_posterior_mean, Lattice, MseEvaluator, MsePieces,
};

use crate::error::{Error, Result};
use crate::numerics::{QuadratureRule, RngStream};

/// Model setting shared by both criteria. Hypothetical and simulated current
/// datasets are built from these fields.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// i.i.d. normal outcomes with known variance.
    NormalIid { ybar0: f64, sigma2: f64, n: usize, n0: usize },
    /// i.i.d. Bernoulli outcomes.
    BernoulliIid { ybar0: f64, n: usize, n0: usize },
    /// Normal linear model with one standard-normal covariate; conflict
    /// shifts the intercept.
    NormalLinear { intercept: f64, slope: f64, sigma2: f64, n: usize, n0: usize },
    /// Two-arm logistic trial reconstructed from summary statistics;
    /// conflict shifts the treatment log odds ratio.
    LogisticTwoArm { n0: usize, effect0: f64, control_rate: f64, n: usize },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::NormalIid { sigma2, n, n0, .. } => {
                if !(*sigma2 > 0.0) || *n < 1 || *n0 < 1 {
                    return Err(Error::validation("normal model needs sigma2 > 0 and n, n0 >= 1"));
                }
            }
            ModelSpec::BernoulliIid { ybar0, n, n0 } => {
                if !(*ybar0 > 0.0 && *ybar0 < 1.0) || *n < 1 || *n0 < 1 {
                    return Err(Error::validation(
                        "Bernoulli model needs ybar0 in (0,1) and n, n0 >= 1",
                    ));
                }
            }
            ModelSpec::NormalLinear { sigma2, n, n0, .. } => {
                if !(*sigma2 > 0.0) || *n < 3 || *n0 < 3 {
                    return Err(Error::validation("linear model needs sigma2 > 0 and n, n0 >= 3"));
                }
            }
            ModelSpec::LogisticTwoArm { n0, control_rate, n, .. } => {
                if !(*control_rate > 0.0 && *control_rate < 1.0) || *n < 2 || *n0 < 2 {
                    return Err(Error::validation(
                        "two-arm model needs control rate in (0,1) and n, n0 >= 2",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Configuration of the KL criterion.
///
/// `mtd_shift` is the signed maximum tolerable difference applied to the
/// hypothetical current mean (i.i.d. families), intercept (linear model) or
/// treatment effect (two-arm logistic). Only the linear model consumes the
/// stream (its fixed covariate design); the objective is deterministic.
#[derive(Debug, Clone)]
pub struct KlConfig {
    pub w: f64,
    pub c: f64,
    pub mtd_shift: f64,
    pub model: ModelSpec,
    pub rule: QuadratureRule,
    pub stream: RngStream,
}

impl KlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::validation("w must lie in (0,1)"));
        }
        if !(self.c > 1.0) {
            return Err(Error::validation("target concentration c must exceed 1"));
        }
        if !self.mtd_shift.is_finite() {
            return Err(Error::validation("mtd_shift must be finite"));
        }
        self.model.validate()
    }
}

/// Configuration of the MSE criterion.
///
/// `fixed_current_mean` switches to the variant where the hypothetical true
/// current mean stays fixed and the historical mean is shifted instead; for
/// the symmetric families the two variants coincide.
#[derive(Debug, Clone)]
pub struct MseConfig {
    pub w: f64,
    pub mtd_shift: f64,
    pub model: ModelSpec,
    pub mc_reps: usize,
    pub stream: RngStream,
    pub rule: QuadratureRule,
    pub fixed_current_mean: bool,
}

impl MseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::validation("w must lie in (0,1)"));
        }
        if self.mc_reps < 100 {
            return Err(Error::validation("mc_reps must be at least 100"));
        }
        if !self.mtd_shift.is_finite() {
            return Err(Error::validation("mtd_shift must be finite"));
        }
        if self.fixed_current_mean && !matches!(self.model, ModelSpec::NormalIid { .. }) {
            return Err(Error::validation(
                "the fixed-current-mean variant is defined for the normal i.i.d. model",
            ));
        }
        self.model.validate()
    }
}
