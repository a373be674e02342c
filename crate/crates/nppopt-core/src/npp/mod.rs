//! The normalized power prior: normalizing constants, marginal posteriors of
//! the discounting parameter under exact, asymptotic and Laplace paths, and
//! posterior summaries of the parameter of interest.

mod asymptotic;
mod exact;
mod grid;
mod laplace;
mod summary;

pub use asymptotic::{marginal_a0_asymptotic_glm, marginal_a0_asymptotic_iid, DiscrepancyScenario};
pub use exact::{
    joint_log_kernel_iid, log_norm_const, log_norm_const_glm, marginal_a0_exact,
    marginal_a0_exact_mixture_prior, regression_log_lik,
};
pub use grid::{format_sig as grid_format_sig, DensityGrid};
pub use laplace::marginal_a0_laplace_glm;
pub use summary::{
    posterior_beta_summary_glm, posterior_mu_summary, posterior_prob_coef_positive, CoefSummary,
    PosteriorSummary,
};

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::log_beta_fn;

/// Shape parameters of a beta prior on the discounting parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha0: f64,
    pub beta0: f64,
}

impl BetaParams {
    pub fn new(alpha0: f64, beta0: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) || !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::domain(format!(
                "beta shape parameters must be positive and finite, got ({alpha0}, {beta0})"
            )));
        }
        Ok(BetaParams { alpha0, beta0 })
    }

    pub fn uniform() -> Self {
        BetaParams { alpha0: 1.0, beta0: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.alpha0 / (self.alpha0 + self.beta0)
    }

    /// Log density at `a0` in (0, 1), without range checks on the shapes.
    pub fn log_pdf(&self, a0: f64) -> f64 {
        let lb = log_beta_fn(self.alpha0, self.beta0).expect("shapes validated positive");
        (self.alpha0 - 1.0) * a0.ln() + (self.beta0 - 1.0) * (-a0).ln_1p() - lb
    }
}

/// Initial prior on the model parameters, before historical information.
///
/// `Flat` means flat on the mean space (for a Bernoulli mean this is
/// beta(1,1)); the `Normal` variant is for regression coefficients.
#[derive(Debug, Clone)]
pub enum InitialPrior {
    Flat,
    Normal { mean: DVector<f64>, cov: DMatrix<f64> },
}

impl InitialPrior {
    /// Weakly informative N(0, 100^2 I) on `p` coefficients; keeps the whole
    /// a0 grid admissible for the Laplace path.
    pub fn default_glm(p: usize) -> Self {
        InitialPrior::Normal {
            mean: DVector::zeros(p),
            cov: DMatrix::identity(p, p) * 1e4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InitialPrior::Normal { mean, cov } = self {
            if cov.nrows() != cov.ncols() || cov.nrows() != mean.len() {
                return Err(Error::Dimension("initial prior covariance must be p x p".into()));
            }
            if Cholesky::new(cov.clone()).is_none() {
                return Err(Error::validation("initial prior covariance not positive definite"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn beta_params_validate() {
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
        let p = BetaParams::new(2.0, 5.0).unwrap();
        assert_abs_diff_eq!(p.mean(), 2.0 / 7.0, epsilon = 1e-14);
    }

    #[test]
    fn beta_log_pdf_integrates_to_one() {
        // endpoint-transformed rule: shapes below one put unbounded density
        // at the endpoints
        let rule = crate::numerics::QuadratureRule::default_endpoint_transformed();
        for (a, b) in [(1.0, 1.0), (2.0, 5.0), (0.7, 1.5), (10.0, 1.0)] {
            let p = BetaParams::new(a, b).unwrap();
            let v = crate::numerics::integrate_unit(|x| p.log_pdf(x).exp(), &rule).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "beta({a},{b}) integrates to {v}");
        }
    }
}
