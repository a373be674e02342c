//! The MSE criterion: Monte Carlo mean squared error of the normalized
//! power prior posterior mean under two hypothetical truths, minimized by
//! grid search over the beta shape parameters.
//!
//! Simulated datasets are keyed by `(master_seed, term, rep)` so that every
//! candidate prior sees the same draws (common random numbers); the
//! objective is deterministic given the configured stream.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::criteria::{ModelSpec, MseConfig};
use crate::error::{Error, Result};
use crate::families::{
    fit_glm_mle, reconstruct_two_arm_logistic, simulate_bernoulli_summary, simulate_design,
    simulate_normal_summary, simulate_regression, BernoulliSummary, DataSummary, DesignSpec,
    FitResult, GlmFamily, NormalSummary,
};
use crate::npp::{
    marginal_a0_asymptotic_glm, marginal_a0_exact, BetaParams, InitialPrior,
};
use crate::numerics::{grid_search_min, OptimResult, RngStream};

/// Mean squared error with its decomposition. `mse = bias_sq + variance`
/// holds exactly (population-variance normalization); `mc_se` is the Monte
/// Carlo standard error of the MSE estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsePieces {
    pub mse: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub mc_se: f64,
}

/// Square lattice for the grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for Lattice {
    /// The case-study search range: 0.5 to 6 in steps of 0.5.
    fn default() -> Self {
        Lattice { lo: 0.5, hi: 6.0, step: 0.5 }
    }
}

/// Simulated current data prepared once per (term, rep) pair.
enum PreparedRep {
    Normal(NormalSummary),
    Bernoulli(BernoulliSummary),
    Glm(FitResult),
}

enum HistoricalSide {
    Summary(DataSummary),
    Fit(FitResult),
}

/// Pre-simulated Monte Carlo state for one MSE configuration. Building the
/// evaluator performs all data simulation and model fitting; evaluating a
/// candidate prior only re-mixes the discounting-parameter grid.
pub struct MseEvaluator {
    cfg: MseConfig,
    truths: [f64; 2],
    historical: [HistoricalSide; 2],
    reps: [Vec<PreparedRep>; 2],
}

impl MseEvaluator {
    pub fn new(cfg: &MseConfig) -> Result<Self> {
        cfg.validate()?;
        let truths = term_truths(cfg);
        let historical = [historical_side(cfg, 0)?, historical_side(cfg, 1)?];
        let reps = [prepare_reps(cfg, 0, truths[0])?, prepare_reps(cfg, 1, truths[1])?];
        Ok(MseEvaluator { cfg: cfg.clone(), truths, historical, reps })
    }

    pub fn truth(&self, term: usize) -> f64 {
        self.truths[term]
    }

    /// MSE pieces of one term at a candidate prior.
    pub fn pieces(&self, term: usize, params: &BetaParams) -> Result<MsePieces> {
        let truth = self.truths[term];
        let means: Vec<f64> = self.reps[term]
            .par_iter()
            .map(|rep| posterior_mean(rep, &self.historical[term], params, &self.cfg))
            .collect::<Result<Vec<f64>>>()?;
        let r = means.len() as f64;
        let errs: Vec<f64> = means.iter().map(|m| m - truth).collect();
        let mse = errs.iter().map(|e| e * e).sum::<f64>() / r;
        let bias = errs.iter().sum::<f64>() / r;
        let bias_sq = bias * bias;
        let variance = mse - bias_sq;
        let var_sq = errs.iter().map(|e| (e * e - mse).powi(2)).sum::<f64>() / (r - 1.0);
        Ok(MsePieces { mse, bias_sq, variance, mc_se: (var_sq / r).sqrt() })
    }

    /// The weighted objective `w MSE(term 0) + (1-w) MSE(term 1)`.
    pub fn objective(&self, params: &BetaParams) -> Result<f64> {
        let t0 = self.pieces(0, params)?;
        let t1 = self.pieces(1, params)?;
        Ok(self.cfg.w * t0.mse + (1.0 - self.cfg.w) * t1.mse)
    }
}

/// The hypothetical true parameter for each term: the historical estimate,
/// and the historical estimate shifted by the maximum tolerable difference.
fn term_truths(cfg: &MseConfig) -> [f64; 2] {
    let (center, shift) = match &cfg.model {
        ModelSpec::NormalIid { ybar0, .. } => (*ybar0, cfg.mtd_shift),
        ModelSpec::BernoulliIid { ybar0, .. } => (*ybar0, cfg.mtd_shift),
        ModelSpec::NormalLinear { intercept, .. } => (*intercept, cfg.mtd_shift),
        ModelSpec::LogisticTwoArm { effect0, .. } => (*effect0, cfg.mtd_shift),
    };
    if cfg.fixed_current_mean {
        // the truth stays at the historical estimate in both terms; the
        // conflict moves the historical data instead
        [center, center]
    } else {
        [center, center + shift]
    }
}

fn historical_side(cfg: &MseConfig, term: usize) -> Result<HistoricalSide> {
    let shift = if cfg.fixed_current_mean && term == 1 { cfg.mtd_shift } else { 0.0 };
    match &cfg.model {
        ModelSpec::NormalIid { ybar0, sigma2, n0, .. } => Ok(HistoricalSide::Summary(
            DataSummary::Normal(NormalSummary::new(*n0, *ybar0 + shift, *sigma2)?),
        )),
        ModelSpec::BernoulliIid { ybar0, n0, .. } => Ok(HistoricalSide::Summary(
            DataSummary::Bernoulli(BernoulliSummary::new(*n0, (*ybar0 + shift) * *n0 as f64)?),
        )),
        ModelSpec::NormalLinear { intercept, slope, sigma2, n0, .. } => {
            let x0 = simulate_design(
                DesignSpec::StandardNormal { covariates: 1 },
                *n0,
                cfg.stream.substream(design_tag(0)),
            )?;
            let beta = DVector::from_column_slice(&[*intercept + shift, *slope]);
            let y0 = &x0 * &beta;
            let data = crate::families::RegressionDataset::new(
                x0,
                y0,
                GlmFamily::LinearKnownVariance { sigma2: *sigma2 },
            )?;
            Ok(HistoricalSide::Fit(fit_glm_mle(&data)?))
        }
        ModelSpec::LogisticTwoArm { n0, effect0, control_rate, .. } => Ok(HistoricalSide::Fit(
            reconstruct_two_arm_logistic(*n0, *effect0 + shift, *control_rate)?,
        )),
    }
}

const fn design_tag(term: usize) -> u64 {
    0xDE51_0000 + term as u64
}

const fn rep_tag(term: usize, rep: usize) -> u64 {
    (term as u64 + 1) << 32 | rep as u64
}

fn prepare_reps(cfg: &MseConfig, term: usize, truth: f64) -> Result<Vec<PreparedRep>> {
    let streams: Vec<RngStream> =
        (0..cfg.mc_reps).map(|r| cfg.stream.substream(rep_tag(term, r))).collect();
    match &cfg.model {
        ModelSpec::NormalIid { sigma2, n, .. } => streams
            .par_iter()
            .map(|s| Ok(PreparedRep::Normal(simulate_normal_summary(truth, *sigma2, *n, *s)?)))
            .collect(),
        ModelSpec::BernoulliIid { n, .. } => streams
            .par_iter()
            .map(|s| Ok(PreparedRep::Bernoulli(simulate_bernoulli_summary(truth, *n, *s)?)))
            .collect(),
        ModelSpec::NormalLinear { slope, sigma2, n, .. } => {
            let x = simulate_design(
                DesignSpec::StandardNormal { covariates: 1 },
                *n,
                cfg.stream.substream(design_tag(1)),
            )?;
            let beta = DVector::from_column_slice(&[truth, *slope]);
            streams
                .par_iter()
                .map(|s| {
                    let data = simulate_regression(
                        &beta,
                        x.clone(),
                        GlmFamily::LinearKnownVariance { sigma2: *sigma2 },
                        *s,
                    )?;
                    Ok(PreparedRep::Glm(fit_glm_mle(&data)?))
                })
                .collect()
        }
        ModelSpec::LogisticTwoArm { control_rate, n, .. } => {
            let x = simulate_design(DesignSpec::TwoArm, *n, cfg.stream.substream(design_tag(1)))?;
            let intercept = (control_rate / (1.0 - control_rate)).ln();
            let beta = DVector::from_column_slice(&[intercept, truth]);
            streams
                .par_iter()
                .map(|s| {
                    let data = simulate_regression(&beta, x.clone(), GlmFamily::Logistic, *s)?;
                    Ok(PreparedRep::Glm(fit_glm_mle(&data)?))
                })
                .collect()
        }
    }
}

/// Posterior mean of the parameter of interest for one simulated dataset.
fn posterior_mean(
    rep: &PreparedRep,
    historical: &HistoricalSide,
    params: &BetaParams,
    cfg: &MseConfig,
) -> Result<f64> {
    match (rep, historical) {
        (PreparedRep::Normal(c), HistoricalSide::Summary(DataSummary::Normal(h))) => {
            let cur = DataSummary::Normal(*c);
            let hist = DataSummary::Normal(*h);
            let grid = marginal_a0_exact(&cur, &hist, params, &InitialPrior::Flat, &cfg.rule)?;
            let (n, n0) = (c.n as f64, h.n as f64);
            Ok(grid.expect(|a| {
                let prec = n / c.sigma2 + a * n0 / h.sigma2;
                (n * c.ybar / c.sigma2 + a * n0 * h.ybar / h.sigma2) / prec
            }))
        }
        (PreparedRep::Bernoulli(c), HistoricalSide::Summary(DataSummary::Bernoulli(h))) => {
            let cur = DataSummary::Bernoulli(*c);
            let hist = DataSummary::Bernoulli(*h);
            let grid = marginal_a0_exact(&cur, &hist, params, &InitialPrior::Flat, &cfg.rule)?;
            let (s, f) = (c.successes, c.n as f64 - c.successes);
            let (s0, f0) = (h.successes, h.n as f64 - h.successes);
            Ok(grid.expect(|a| {
                let alpha = s + a * s0 + 1.0;
                let beta = f + a * f0 + 1.0;
                alpha / (alpha + beta)
            }))
        }
        (PreparedRep::Glm(fit), HistoricalSide::Fit(fit0)) => {
            let grid = marginal_a0_asymptotic_glm(fit, fit0, params, &cfg.rule)?;
            let coef = coef_of_interest(&cfg.model);
            let n = fit.n as f64;
            let n0 = fit0.n as f64;
            let rhs_cur = &fit.info * &fit.beta_hat * n;
            let rhs_hist = &fit0.info * &fit0.beta_hat * n0;
            Ok(grid.expect(|a| {
                let prec = n * &fit.info + a * n0 * &fit0.info;
                let chol = nalgebra::Cholesky::new(prec).expect("precision PD on (0,1)");
                chol.solve(&(&rhs_cur + a * &rhs_hist))[coef]
            }))
        }
        _ => Err(Error::domain("prepared data and historical side disagree")),
    }
}

fn coef_of_interest(model: &ModelSpec) -> usize {
    match model {
        // linear-model conflict lives in the intercept; two-arm trials care
        // about the treatment effect
        ModelSpec::NormalLinear { .. } => 0,
        _ => 1,
    }
}

/// Monte Carlo MSE of the posterior mean when the true parameter is
/// `mu_star`. The historical side comes from the configuration; `mu_star`
/// must match one of the two configured terms so that the common-random-
/// number streams stay aligned.
pub fn mse_of_posterior_mean(
    mu_star: f64,
    params: &BetaParams,
    cfg: &MseConfig,
) -> Result<MsePieces> {
    let truths = term_truths(cfg);
    let term = if (mu_star - truths[0]).abs() <= 1e-12 {
        0
    } else if (mu_star - truths[1]).abs() <= 1e-12 {
        1
    } else {
        return Err(Error::domain(format!(
            "mu_star = {mu_star} matches neither configured truth ({} or {})",
            truths[0], truths[1]
        )));
    };
    let historical = historical_side(cfg, term)?;
    let reps = prepare_reps(cfg, term, truths[term])?;
    let eval = MseEvaluator {
        cfg: cfg.clone(),
        truths: [truths[term], truths[term]],
        historical: [historical_side(cfg, term)?, historical],
        reps: [Vec::new(), reps],
    };
    eval.pieces(1, params)
}

/// The weighted MSE objective at one candidate prior.
pub fn mse_objective(params: &BetaParams, cfg: &MseConfig) -> Result<f64> {
    MseEvaluator::new(cfg)?.objective(params)
}

/// Grid-search minimization of the MSE objective over the lattice.
pub fn derive_optimal_mse(cfg: &MseConfig, lattice: Lattice) -> Result<OptimResult> {
    let eval = MseEvaluator::new(cfg)?;
    grid_search_min(
        |p| match BetaParams::new(p[0], p[1]) {
            Ok(params) => eval.objective(&params).unwrap_or(f64::NAN),
            Err(_) => f64::NAN,
        },
        lattice.lo,
        lattice.hi,
        lattice.step,
    )
}
