//! Laplace-approximated marginal posterior of the discounting parameter for
//! GLMs with full design matrices.
//!
//! At each grid node the posterior kernel is the ratio of two integrals,
//!
//! ```text
//! c1(a0) = int exp{ l(b) + a0 l0(b) } pi0(b) db
//! c2(a0) = int exp{        a0 l0(b) } pi0(b) db
//! ```
//!
//! each approximated by Laplace's method around its own mode. Modes come
//! from Newton solves that must reach gradient norm 1e-8.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::families::{GlmFamily, IidFamily, RegressionDataset};
use crate::families::cumulant;
use crate::npp::{BetaParams, DensityGrid, InitialPrior};
use crate::numerics::QuadratureRule;

/// Log-likelihood kernel of a GLM dataset (additive constants dropped; they
/// cancel in the c1/c2 ratio).
pub(crate) fn glm_log_lik(data: &RegressionDataset, beta: &DVector<f64>) -> f64 {
    let eta = &data.x * beta;
    match data.family {
        GlmFamily::Logistic => {
            let mut ll = 0.0;
            for i in 0..data.n() {
                let (b, _, _) = cumulant(IidFamily::Bernoulli, eta[i]);
                ll += data.y[i] * eta[i] - b;
            }
            ll
        }
        GlmFamily::LinearKnownVariance { sigma2 } => {
            let mut ll = 0.0;
            for i in 0..data.n() {
                ll -= (data.y[i] - eta[i]).powi(2) / (2.0 * sigma2);
            }
            ll
        }
    }
}

fn glm_score_neg_hess(
    data: &RegressionDataset,
    beta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let eta = &data.x * beta;
    let p = data.p();
    let mut score = DVector::zeros(p);
    let mut neg_hess = DMatrix::zeros(p, p);
    match data.family {
        GlmFamily::Logistic => {
            for i in 0..data.n() {
                let (_, mu, w) = cumulant(IidFamily::Bernoulli, eta[i]);
                let xi = data.x.row(i).transpose();
                score += (data.y[i] - mu) * &xi;
                neg_hess += w * &xi * xi.transpose();
            }
        }
        GlmFamily::LinearKnownVariance { sigma2 } => {
            for i in 0..data.n() {
                let xi = data.x.row(i).transpose();
                score += (data.y[i] - eta[i]) / sigma2 * &xi;
                neg_hess += &xi * xi.transpose() / sigma2;
            }
        }
    }
    (score, neg_hess)
}

/// A weighted sum of GLM log likelihoods plus a normal prior term:
/// `q(b) = sum_k w_k l_k(b) - (b - m)' V^-1 (b - m) / 2`.
pub(crate) struct GlmObjective<'a> {
    pub terms: Vec<(f64, &'a RegressionDataset)>,
    pub prior_mean: DVector<f64>,
    pub prior_prec: DMatrix<f64>,
}

impl GlmObjective<'_> {
    fn value(&self, beta: &DVector<f64>) -> f64 {
        let diff = beta - &self.prior_mean;
        let mut v = -0.5 * diff.dot(&(&self.prior_prec * &diff));
        for (w, data) in &self.terms {
            v += w * glm_log_lik(data, beta);
        }
        v
    }

    fn score_neg_hess(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = beta.len();
        let mut score = -(&self.prior_prec * (beta - &self.prior_mean));
        let mut neg_hess = self.prior_prec.clone();
        let mut tmp_score = DVector::zeros(p);
        let mut tmp_hess = DMatrix::zeros(p, p);
        for (w, data) in &self.terms {
            let (s, h) = glm_score_neg_hess(data, beta);
            tmp_score.copy_from(&s);
            tmp_hess.copy_from(&h);
            score += *w * tmp_score.clone();
            neg_hess += *w * tmp_hess.clone();
        }
        (score, neg_hess)
    }
}

const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 200;

/// Newton-with-step-halving maximization of a GLM objective.
///
/// Returns the maximizer, the objective value there and the log determinant
/// of the negative Hessian at the maximizer.
pub(crate) fn newton_maximize(
    obj: &GlmObjective<'_>,
    p: usize,
    warm_start: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, f64, f64)> {
    let mut beta = warm_start.cloned().unwrap_or_else(|| DVector::zeros(p));
    let mut value = obj.value(&beta);
    if !value.is_finite() {
        beta = DVector::zeros(p);
        value = obj.value(&beta);
    }
    for _ in 0..MAX_NEWTON {
        let (score, neg_hess) = obj.score_neg_hess(&beta);
        if score.norm() <= GRAD_TOL {
            let chol = Cholesky::new(neg_hess)
                .ok_or_else(|| Error::NonConvergence("negative Hessian not PD at mode".into()))?;
            let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            return Ok((beta, value, log_det));
        }
        let chol = Cholesky::new(neg_hess)
            .ok_or_else(|| Error::NonConvergence("singular Hessian in Newton step".into()))?;
        let step = chol.solve(&score);
        let mut lambda = 1.0;
        let mut moved = false;
        // accept steps whose improvement is below float resolution
        let slack = 1e-12 * (1.0 + value.abs());
        for _ in 0..40 {
            let cand = &beta + lambda * &step;
            let cand_v = obj.value(&cand);
            if cand_v.is_finite() && cand_v >= value - slack {
                beta = cand;
                value = cand_v.max(value);
                moved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !moved {
            return Err(Error::NonConvergence("step-halving stalled in Laplace solve".into()));
        }
    }
    Err(Error::NonConvergence(format!(
        "Newton did not reach gradient tolerance {GRAD_TOL}"
    )))
}

/// Marginal posterior of the discounting parameter via per-node Laplace
/// approximations of both normalizing integrals.
pub fn marginal_a0_laplace_glm(
    current: &RegressionDataset,
    historical: &RegressionDataset,
    prior: &BetaParams,
    init: &InitialPrior,
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    if current.p() != historical.p() {
        return Err(Error::Dimension("current and historical designs have different p".into()));
    }
    init.validate()?;
    let InitialPrior::Normal { mean, cov } = init else {
        return Err(Error::domain("Laplace path needs a proper normal initial prior"));
    };
    let prior_prec = Cholesky::new(cov.clone())
        .ok_or_else(|| Error::validation("initial prior covariance not positive definite"))?
        .inverse();
    let p = current.p();

    let mut log_values = Vec::with_capacity(rule.len());
    let mut warm1: Option<DVector<f64>> = None;
    let mut warm2: Option<DVector<f64>> = None;
    for (i, &a0) in rule.nodes().iter().enumerate() {
        let joint = GlmObjective {
            terms: vec![(1.0, current), (a0, historical)],
            prior_mean: mean.clone(),
            prior_prec: prior_prec.clone(),
        };
        let (b1, v1, ld1) = newton_maximize(&joint, p, warm1.as_ref()).map_err(|e| {
            Error::Evaluation { node: i, a0, what: format!("joint-likelihood Laplace solve: {e}") }
        })?;
        let powered = GlmObjective {
            terms: vec![(a0, historical)],
            prior_mean: mean.clone(),
            prior_prec: prior_prec.clone(),
        };
        let (b2, v2, ld2) = newton_maximize(&powered, p, warm2.as_ref()).map_err(|e| {
            Error::Evaluation { node: i, a0, what: format!("powered-prior Laplace solve: {e}") }
        })?;
        warm1 = Some(b1);
        warm2 = Some(b2);
        // (2 pi)^{p/2} factors cancel in the ratio
        log_values.push(prior.log_pdf(a0) + (v1 - 0.5 * ld1) - (v2 - 0.5 * ld2));
    }
    DensityGrid::from_log_values(rule.clone(), log_values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{BernoulliSummary, DataSummary};
    use crate::npp::marginal_a0_exact;

    fn intercept_only_bernoulli(n: usize, successes: usize) -> RegressionDataset {
        let x = DMatrix::from_element(n, 1, 1.0);
        let y = DVector::from_fn(n, |i, _| if i < successes { 1.0 } else { 0.0 });
        RegressionDataset::new(x, y, GlmFamily::Logistic).unwrap()
    }

    #[test]
    fn matches_exact_bernoulli_within_two_percent() {
        // p = 1 intercept-only, n = n0 = 100: the Laplace path approximates
        // the same posterior as the conjugate computation.
        let rule = QuadratureRule::default_a0();
        let cur = intercept_only_bernoulli(100, 70);
        let hist = intercept_only_bernoulli(100, 70);
        let prior = BetaParams::new(2.0, 2.0).unwrap();
        let lap =
            marginal_a0_laplace_glm(&cur, &hist, &prior, &InitialPrior::default_glm(1), &rule)
                .unwrap();
        let exact = marginal_a0_exact(
            &DataSummary::Bernoulli(BernoulliSummary::new(100, 70.0).unwrap()),
            &DataSummary::Bernoulli(BernoulliSummary::new(100, 70.0).unwrap()),
            &prior,
            &InitialPrior::Flat,
            &rule,
        )
        .unwrap();
        let max_exact = exact.densities().iter().cloned().fold(0.0f64, f64::max);
        let sup = lap
            .densities()
            .iter()
            .zip(exact.densities())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(sup / max_exact < 0.02, "sup-norm relative gap {}", sup / max_exact);
    }

    #[test]
    fn flat_ratio_returns_prior() {
        // With no current data contribution the c1/c2 ratio is constant in
        // a0 only in the degenerate sense; emulate the contract by feeding a
        // constant ratio directly through the grid builder.
        let rule = QuadratureRule::default_a0();
        let prior = BetaParams::new(1.0, 1.0).unwrap();
        let g = DensityGrid::from_log_kernel(rule.clone(), |a| prior.log_pdf(a) + 3.7).unwrap();
        for (&a, ld) in g.nodes().iter().zip(g.log_densities()) {
            assert!((ld - prior.log_pdf(a)).abs() < 1e-12);
        }
    }

    #[test]
    fn improper_initial_prior_rejected() {
        let rule = QuadratureRule::default_a0();
        let cur = intercept_only_bernoulli(20, 10);
        let hist = intercept_only_bernoulli(20, 10);
        assert!(marginal_a0_laplace_glm(
            &cur,
            &hist,
            &BetaParams::uniform(),
            &InitialPrior::Flat,
            &rule
        )
        .is_err());
    }
}
