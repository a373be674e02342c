//! Posterior summaries of the mean parameter (i.i.d. paths) and of a
//! designated regression coefficient (GLM path), mixing conditional
//! posteriors over the discounting-parameter grid.

use nalgebra::{Cholesky, DVector};
use statrs::distribution::{Beta as BetaDist, ContinuousCDF, Normal as NormalDist};

use crate::error::{Error, Result};
use crate::families::{DataSummary, FitResult};
use crate::npp::{marginal_a0_asymptotic_glm, marginal_a0_exact, BetaParams, DensityGrid, InitialPrior};
use crate::numerics::QuadratureRule;

/// Mixture posterior summary of the mean parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mixture posterior summary of one regression coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

const INTERVAL_TOL: f64 = 1e-6;
const INTERVAL_LEVEL: f64 = 0.95;

/// Posterior mean, variance and equal-tailed 95% interval of the mean
/// parameter under the normalized power prior, for the exact i.i.d. paths.
pub fn posterior_mu_summary(
    current: &DataSummary,
    historical: &DataSummary,
    prior: &BetaParams,
    init: &InitialPrior,
    rule: &QuadratureRule,
) -> Result<PosteriorSummary> {
    let grid = marginal_a0_exact(current, historical, prior, init, rule)?;
    posterior_mu_summary_for_grid(current, historical, &grid)
}

/// Same summary, but mixing over a caller-supplied (already normalized)
/// grid; used for mixture priors on the discounting parameter.
pub fn posterior_mu_summary_for_grid(
    current: &DataSummary,
    historical: &DataSummary,
    grid: &DensityGrid,
) -> Result<PosteriorSummary> {
    if !grid.is_normalized() {
        return Err(Error::validation("density grid must be normalized"));
    }
    match (current, historical) {
        (DataSummary::Normal(c), DataSummary::Normal(h)) => {
            let (n, n0) = (c.n as f64, h.n as f64);
            let cond = |a: f64| {
                let prec = n / c.sigma2 + a * n0 / h.sigma2;
                let mean = (n * c.ybar / c.sigma2 + a * n0 * h.ybar / h.sigma2) / prec;
                (mean, 1.0 / prec)
            };
            let (mean, variance) = mix_moments(grid, cond);
            let sd_span = variance.sqrt() * 12.0 + 1e-6;
            let cdf = |t: f64| {
                grid.expect(|a| {
                    let (m, v) = cond(a);
                    NormalDist::new(m, v.sqrt()).map(|d| d.cdf(t)).unwrap_or(f64::NAN)
                })
            };
            let (lower, upper) = equal_tail_interval(cdf, mean - sd_span, mean + sd_span)?;
            Ok(PosteriorSummary { mean, variance, lower, upper })
        }
        (DataSummary::Bernoulli(c), DataSummary::Bernoulli(h)) => {
            let (s, f) = (c.successes, c.n as f64 - c.successes);
            let (s0, f0) = (h.successes, h.n as f64 - h.successes);
            let cond = |a: f64| {
                let alpha = s + a * s0 + 1.0;
                let beta = f + a * f0 + 1.0;
                let total = alpha + beta;
                (alpha / total, alpha * beta / (total * total * (total + 1.0)))
            };
            let (mean, variance) = mix_moments(grid, cond);
            let cdf = |t: f64| {
                grid.expect(|a| {
                    let alpha = s + a * s0 + 1.0;
                    let beta = f + a * f0 + 1.0;
                    BetaDist::new(alpha, beta).map(|d| d.cdf(t)).unwrap_or(f64::NAN)
                })
            };
            let (lower, upper) = equal_tail_interval(cdf, 0.0, 1.0)?;
            Ok(PosteriorSummary { mean, variance, lower, upper })
        }
        _ => Err(Error::domain("family mismatch")),
    }
}

/// Posterior mean, sd and 95% interval of coefficient `coef` under the
/// asymptotic GLM path: conditional on a0 the posterior of the coefficients
/// is normal with precision `n P + a0 n0 P0`.
pub fn posterior_beta_summary_glm(
    fit: &FitResult,
    fit0: &FitResult,
    prior: &BetaParams,
    rule: &QuadratureRule,
    coef: usize,
) -> Result<CoefSummary> {
    let grid = marginal_a0_asymptotic_glm(fit, fit0, prior, rule)?;
    let cond = conditional_coef_moments(fit, fit0, coef)?;
    let (mean, variance) = mix_moments(&grid, |a| cond(a));
    let sd = variance.sqrt();
    let cdf = |t: f64| {
        grid.expect(|a| {
            let (m, v) = cond(a);
            NormalDist::new(m, v.sqrt()).map(|d| d.cdf(t)).unwrap_or(f64::NAN)
        })
    };
    let span = sd * 12.0 + 1e-6;
    let (lower, upper) = equal_tail_interval(cdf, mean - span, mean + span)?;
    Ok(CoefSummary { mean, sd, lower, upper })
}

/// Posterior probability that coefficient `coef` is positive, mixed over the
/// discounting-parameter grid. This is the decision quantity for power
/// simulation.
pub fn posterior_prob_coef_positive(
    fit: &FitResult,
    fit0: &FitResult,
    prior: &BetaParams,
    rule: &QuadratureRule,
    coef: usize,
) -> Result<f64> {
    let grid = marginal_a0_asymptotic_glm(fit, fit0, prior, rule)?;
    let cond = conditional_coef_moments(fit, fit0, coef)?;
    Ok(grid.expect(|a| {
        let (m, v) = cond(a);
        let z = m / v.sqrt();
        NormalDist::new(0.0, 1.0).map(|d| d.cdf(z)).unwrap_or(f64::NAN)
    }))
}

/// Conditional posterior mean and variance of one coefficient given a0.
fn conditional_coef_moments<'a>(
    fit: &'a FitResult,
    fit0: &'a FitResult,
    coef: usize,
) -> Result<impl Fn(f64) -> (f64, f64) + 'a> {
    let p = fit.p();
    if fit0.p() != p {
        return Err(Error::Dimension("fits have different p".into()));
    }
    if coef >= p {
        return Err(Error::Dimension(format!("coefficient {coef} out of range for p = {p}")));
    }
    let n = fit.n as f64;
    let n0 = fit0.n as f64;
    let rhs_cur = &fit.info * &fit.beta_hat * n;
    let rhs_hist = &fit0.info * &fit0.beta_hat * n0;
    Ok(move |a: f64| {
        let prec = n * &fit.info + a * n0 * &fit0.info;
        let chol = Cholesky::new(prec).expect("precision is positive definite on (0,1)");
        let mean_vec = chol.solve(&(&rhs_cur + a * &rhs_hist));
        let mut e = DVector::zeros(p);
        e[coef] = 1.0;
        let col = chol.solve(&e);
        (mean_vec[coef], col[coef])
    })
}

/// Mixture mean and variance from conditional moments by the laws of total
/// expectation and variance.
fn mix_moments(grid: &DensityGrid, cond: impl Fn(f64) -> (f64, f64)) -> (f64, f64) {
    let mean = grid.expect(|a| cond(a).0);
    let second = grid.expect(|a| {
        let (m, v) = cond(a);
        v + m * m
    });
    (mean, second - mean * mean)
}

/// Equal-tailed interval by bisection on a mixture CDF.
fn equal_tail_interval(cdf: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let tail = (1.0 - INTERVAL_LEVEL) / 2.0;
    let lower = invert_cdf(&cdf, tail, lo, hi)?;
    let upper = invert_cdf(&cdf, 1.0 - tail, lo, hi)?;
    Ok((lower, upper))
}

fn invert_cdf(cdf: &impl Fn(f64) -> f64, q: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let flo = cdf(lo);
    let fhi = cdf(hi);
    if !flo.is_finite() || !fhi.is_finite() || flo > q || fhi < q {
        return Err(Error::NonConvergence(format!(
            "quantile {q} not bracketed by [{lo}, {hi}] (cdf {flo}..{fhi})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < INTERVAL_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{BernoulliSummary, NormalSummary};
    use nalgebra::DMatrix;

    fn rule() -> QuadratureRule {
        QuadratureRule::default_a0()
    }

    #[test]
    fn equal_means_are_not_shrunk() {
        let cur = DataSummary::Normal(NormalSummary::new(30, 1.5, 1.0).unwrap());
        let hist = DataSummary::Normal(NormalSummary::new(30, 1.5, 1.0).unwrap());
        let s = posterior_mu_summary(
            &cur,
            &hist,
            &BetaParams::new(3.0, 2.0).unwrap(),
            &InitialPrior::Flat,
            &rule(),
        )
        .unwrap();
        assert!((s.mean - 1.5).abs() < 1e-10);
        assert!(s.lower < 1.5 && 1.5 < s.upper);
    }

    #[test]
    fn point_mass_prior_at_one_pools() {
        // beta(1e6, 1) is numerically a point mass at a0 = 1; the posterior
        // mean then equals the pooled estimate. Needs the
        // endpoint-transformed rule to resolve the prior's mass.
        let cur = DataSummary::Normal(NormalSummary::new(30, 2.0, 1.0).unwrap());
        let hist = DataSummary::Normal(NormalSummary::new(60, 1.5, 1.0).unwrap());
        let s = posterior_mu_summary(
            &cur,
            &hist,
            &BetaParams::new(1e6, 1.0).unwrap(),
            &InitialPrior::Flat,
            &QuadratureRule::default_endpoint_transformed(),
        )
        .unwrap();
        let pooled = (30.0 * 2.0 + 60.0 * 1.5) / 90.0;
        assert!((s.mean - pooled).abs() < 1e-3, "mean {} vs pooled {pooled}", s.mean);
    }

    #[test]
    fn bernoulli_summary_stays_in_unit_interval() {
        let cur = DataSummary::Bernoulli(BernoulliSummary::new(100, 70.0).unwrap());
        let hist = DataSummary::Bernoulli(BernoulliSummary::new(200, 140.0).unwrap());
        let s = posterior_mu_summary(
            &cur,
            &hist,
            &BetaParams::new(2.0, 2.0).unwrap(),
            &InitialPrior::Flat,
            &rule(),
        )
        .unwrap();
        assert!(s.lower > 0.0 && s.upper < 1.0 && s.lower < s.mean && s.mean < s.upper);
        assert!((s.mean - 0.7).abs() < 0.05);
    }

    #[test]
    fn glm_delta_zero_keeps_conditional_mean() {
        let fit = FitResult::new(
            DVector::from_column_slice(&[0.0, 0.481]),
            DMatrix::from_row_slice(2, 2, &[0.24, 0.12, 0.12, 0.12]),
            100,
        )
        .unwrap();
        let s = posterior_beta_summary_glm(&fit, &fit.clone(), &BetaParams::uniform(), &rule(), 1)
            .unwrap();
        assert!((s.mean - 0.481).abs() < 1e-10);
    }
}
