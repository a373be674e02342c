//! Exact normalizing constants and marginal posteriors for the i.i.d.
//! normal and Bernoulli models.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::families::{DataSummary, RegressionDataset};
use crate::npp::laplace::{glm_log_lik, newton_maximize, GlmObjective};
use crate::npp::{BetaParams, DensityGrid, InitialPrior};
use crate::numerics::{log_beta_fn, QuadratureRule, ENDPOINT_EPS};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Log normalizing function `ln c(a0)` of the powered historical likelihood.
///
/// Constants that do not depend on the model parameter are dropped from the
/// likelihood kernel; they cancel in every normalized quantity built from
/// `c(a0)`.
///
/// * normal, flat initial prior: `0.5 ln(2 pi sigma0^2 / (a0 n0))`
/// * Bernoulli, flat (beta(1,1)) initial prior:
///   `ln B(a0 s0 + 1, a0 (n0 - s0) + 1)`
pub fn log_norm_const(historical: &DataSummary, a0: f64, init: &InitialPrior) -> Result<f64> {
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::domain(format!("a0 = {a0} outside (0, 1]")));
    }
    match (historical, init) {
        (DataSummary::Normal(h), InitialPrior::Flat) => {
            if a0 < ENDPOINT_EPS {
                return Err(Error::domain(
                    "flat initial prior: c(a0) diverges below the grid floor".to_string(),
                ));
            }
            Ok(0.5 * (TAU * h.sigma2 / (a0 * h.n as f64)).ln())
        }
        (DataSummary::Bernoulli(h), InitialPrior::Flat) => {
            let s0 = h.successes;
            let f0 = h.n as f64 - s0;
            log_beta_fn(a0 * s0 + 1.0, a0 * f0 + 1.0)
        }
        (_, InitialPrior::Normal { .. }) => Err(Error::domain(
            "normal initial priors are handled by the GLM Laplace path".to_string(),
        )),
    }
}

/// Laplace-approximate `ln c(a0)` for a GLM with a proper normal initial
/// prior.
pub fn log_norm_const_glm(
    historical: &RegressionDataset,
    a0: f64,
    init: &InitialPrior,
) -> Result<f64> {
    if !(a0 > 0.0 && a0 <= 1.0) {
        return Err(Error::domain(format!("a0 = {a0} outside (0, 1]")));
    }
    init.validate()?;
    let InitialPrior::Normal { mean, cov } = init else {
        return Err(Error::domain("GLM normalizing constant needs a proper normal initial prior"));
    };
    let prior_prec = Cholesky::new(cov.clone())
        .ok_or_else(|| Error::validation("initial prior covariance not positive definite"))?
        .inverse();
    let obj = GlmObjective {
        terms: vec![(a0, historical)],
        prior_mean: mean.clone(),
        prior_prec,
    };
    let p = historical.p();
    let (beta, value, log_det_hess) = newton_maximize(&obj, p, None)
        .map_err(|e| Error::NonConvergence(format!("c(a0) Laplace solve failed: {e}")))?;
    let _ = beta;
    Ok(value + 0.5 * p as f64 * TAU.ln() - 0.5 * log_det_hess)
}

/// Exact marginal posterior of the discounting parameter for i.i.d. data.
///
/// The normal path integrates the mean in closed form; the Bernoulli path is
/// the conjugate ratio of beta functions. Both families use the flat initial
/// prior on the mean (see `InitialPrior`).
pub fn marginal_a0_exact(
    current: &DataSummary,
    historical: &DataSummary,
    prior: &BetaParams,
    init: &InitialPrior,
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    if !matches!(init, InitialPrior::Flat) {
        return Err(Error::domain(
            "exact i.i.d. paths use the flat initial prior on the mean".to_string(),
        ));
    }
    match (current, historical) {
        (DataSummary::Normal(c), DataSummary::Normal(h)) => {
            let d = c.ybar - h.ybar;
            let v1 = c.sigma2 / c.n as f64;
            let n0 = h.n as f64;
            let sigma02 = h.sigma2;
            DensityGrid::from_log_kernel(rule.clone(), move |a| {
                let v2 = sigma02 / (a * n0);
                prior.log_pdf(a) + 0.5 * (v1 / (v1 + v2)).ln() - d * d / (2.0 * (v1 + v2))
            })
        }
        (DataSummary::Bernoulli(c), DataSummary::Bernoulli(h)) => {
            let (s, f) = (c.successes, c.n as f64 - c.successes);
            let (s0, f0) = (h.successes, h.n as f64 - h.successes);
            DensityGrid::from_log_kernel(rule.clone(), move |a| {
                let num = log_beta_fn(a * s0 + s + 1.0, a * f0 + f + 1.0)
                    .expect("arguments positive on (0,1)");
                let den = log_beta_fn(a * s0 + 1.0, a * f0 + 1.0).expect("arguments positive");
                prior.log_pdf(a) + num - den
            })
        }
        _ => Err(Error::domain("family mismatch between current and historical summaries")),
    }
}

/// Exact marginal posterior with a mixture of two beta priors on a0,
/// `weight1 * beta(p1) + (1 - weight1) * beta(p2)`.
///
/// Extreme mixture components (large shape parameters) need an
/// endpoint-transformed rule to resolve their mass.
pub fn marginal_a0_exact_mixture_prior(
    current: &DataSummary,
    historical: &DataSummary,
    p1: &BetaParams,
    p2: &BetaParams,
    weight1: f64,
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    if !(0.0..=1.0).contains(&weight1) {
        return Err(Error::domain("mixture weight must be in [0, 1]"));
    }
    // data log kernel from the uniform-prior grid, then re-weight
    let base =
        marginal_a0_exact(current, historical, &BetaParams::uniform(), &InitialPrior::Flat, rule)?;
    let values: Vec<f64> = base
        .nodes()
        .iter()
        .zip(base.log_densities())
        .map(|(&a, lk)| {
            let l1 = if weight1 > 0.0 { weight1.ln() + p1.log_pdf(a) } else { f64::NEG_INFINITY };
            let l2 = if weight1 < 1.0 {
                (1.0 - weight1).ln() + p2.log_pdf(a)
            } else {
                f64::NEG_INFINITY
            };
            let m = l1.max(l2);
            lk + m + ((l1 - m).exp() + (l2 - m).exp()).ln()
        })
        .collect();
    DensityGrid::from_log_values(rule.clone(), values)
}

/// Joint un-normalized log kernel over (theta, a0) for the brute-force
/// oracle integrals used in tests: current likelihood kernel times the
/// normalized power prior times the beta prior.
pub fn joint_log_kernel_iid(
    current: &DataSummary,
    historical: &DataSummary,
    prior: &BetaParams,
    theta: f64,
    a0: f64,
) -> Result<f64> {
    let log_c = log_norm_const(historical, a0, &InitialPrior::Flat)?;
    match (current, historical) {
        (DataSummary::Normal(c), DataSummary::Normal(h)) => {
            let cur = -(c.n as f64) * (theta - c.ybar).powi(2) / (2.0 * c.sigma2);
            let hist = -a0 * h.n as f64 * (theta - h.ybar).powi(2) / (2.0 * h.sigma2);
            Ok(prior.log_pdf(a0) + cur + hist - log_c)
        }
        (DataSummary::Bernoulli(c), DataSummary::Bernoulli(h)) => {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(Error::domain("Bernoulli mean outside (0,1)"));
            }
            let cur = c.successes * theta.ln() + (c.n as f64 - c.successes) * (-theta).ln_1p();
            let hist = a0
                * (h.successes * theta.ln() + (h.n as f64 - h.successes) * (-theta).ln_1p());
            Ok(prior.log_pdf(a0) + cur + hist - log_c)
        }
        _ => Err(Error::domain("family mismatch")),
    }
}

/// Log likelihood kernel of a regression dataset (shared with the Laplace
/// module; exported for tests).
pub fn regression_log_lik(data: &RegressionDataset, beta: &nalgebra::DVector<f64>) -> f64 {
    glm_log_lik(data, beta)
}
