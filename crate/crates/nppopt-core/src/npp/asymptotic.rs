//! Asymptotic-normal marginal posteriors of the discounting parameter for
//! i.i.d. exponential-family data and for GLMs.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::families::FitResult;
use crate::npp::{BetaParams, DensityGrid};
use crate::numerics::QuadratureRule;

/// A current-versus-historical conflict scenario for the i.i.d. paths.
///
/// `delta` lives on the canonical-parameter scale (for the normal family that
/// coincides with the mean difference), `r` is the historical-to-current
/// sample size ratio `n0 / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyScenario {
    pub delta: f64,
    pub r: f64,
    pub n: usize,
}

impl DiscrepancyScenario {
    pub fn new(delta: f64, r: f64, n: usize) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::domain("delta must be finite"));
        }
        if !(r > 0.0) {
            return Err(Error::domain("sample size ratio r must be positive"));
        }
        if n < 1 {
            return Err(Error::domain("n must be >= 1"));
        }
        Ok(DiscrepancyScenario { delta, r, n })
    }
}

/// Asymptotic marginal posterior for i.i.d. exponential-family data.
///
/// `bddot` and `bddot0` are the cumulant curvatures at the current and
/// historical canonical estimates; for a normal model with known variances
/// pass `1/sigma^2` and `1/sigma0^2`. The kernel is
///
/// ```text
/// a^(alpha0-1) (1-a)^(beta0-1) sqrt(a r / (1 + a r v/v0))
///     * exp{ -n a r delta^2 / (2 v0 (1 + a r v/v0)) }
/// ```
///
/// with `v = 1/bddot`, `v0 = 1/bddot0`. For the normal family this is also
/// the exact finite-sample marginal posterior under a flat initial prior.
pub fn marginal_a0_asymptotic_iid(
    scenario: &DiscrepancyScenario,
    bddot: f64,
    bddot0: f64,
    prior: &BetaParams,
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    if !(bddot > 0.0 && bddot0 > 0.0) {
        return Err(Error::domain("cumulant curvatures must be positive"));
    }
    let v = 1.0 / bddot;
    let v0 = 1.0 / bddot0;
    let (delta, r, n) = (scenario.delta, scenario.r, scenario.n as f64);
    let prior = *prior;
    DensityGrid::from_log_kernel(rule.clone(), move |a| {
        let scale = 1.0 + a * r * v / v0;
        prior.log_pdf(a) + 0.5 * (a * r / scale).ln() - n * a * r * delta * delta / (2.0 * v0 * scale)
    })
}

/// Asymptotic marginal posterior of the discounting parameter for GLMs.
///
/// Both fits carry per-observation information matrices. With
/// `delta = beta_hat - beta_hat0`, `r = n0/n` and `P`, `P0` the information
/// matrices, the log kernel (up to constants) is
///
/// ```text
/// (p/2) ln a - (1/2) ln det(P + a r P0)
///     - (n r a / 2) delta' [P0^-1 + a r P^-1]^-1 delta
/// ```
///
/// Every determinant and quadratic form goes through a Cholesky
/// factorization of a symmetric positive-definite matrix.
pub fn marginal_a0_asymptotic_glm(
    fit: &FitResult,
    fit0: &FitResult,
    prior: &BetaParams,
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    let p = fit.p();
    if fit0.p() != p {
        return Err(Error::Dimension(format!(
            "current fit has p = {p}, historical has p = {}",
            fit0.p()
        )));
    }
    let p_inv = Cholesky::new(fit.info.clone())
        .ok_or_else(|| Error::validation("current information not positive definite"))?
        .inverse();
    let p0_inv = Cholesky::new(fit0.info.clone())
        .ok_or_else(|| Error::validation("historical information not positive definite"))?
        .inverse();
    let delta = &fit.beta_hat - &fit0.beta_hat;
    let r = fit0.n as f64 / fit.n as f64;
    let n = fit.n as f64;
    let info = fit.info.clone();
    let info0 = fit0.info.clone();
    let prior = *prior;
    DensityGrid::from_log_kernel(rule.clone(), move |a| {
        let m = &info + a * r * &info0;
        let Some(chol_m) = Cholesky::new(m) else {
            return f64::NAN;
        };
        let log_det_m: f64 = 2.0 * chol_m.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let w = &p0_inv + a * r * &p_inv;
        let Some(chol_w) = Cholesky::new(w) else {
            return f64::NAN;
        };
        let quad = delta.dot(&chol_w.solve(&delta));
        prior.log_pdf(a) + 0.5 * p as f64 * a.ln() - 0.5 * log_det_m - 0.5 * n * r * a * quad
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn rule() -> QuadratureRule {
        QuadratureRule::default_a0()
    }

    #[test]
    fn compatible_case_reduces_to_limit_density() {
        // delta = 0, equal curvatures: density proportional to
        // sqrt(a r/(a r + 1)) times the prior.
        let s = DiscrepancyScenario::new(0.0, 1.0, 30).unwrap();
        let g = marginal_a0_asymptotic_iid(&s, 1.0, 1.0, &BetaParams::uniform(), &rule()).unwrap();
        let expected = DensityGrid::from_log_kernel(rule(), |a| 0.5 * (a / (a + 1.0)).ln()).unwrap();
        for (x, y) in g.log_densities().iter().zip(expected.log_densities()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn scalar_glm_matches_iid_path() {
        // p = 1 intercept-only: the matrix formula collapses to the scalar one.
        let bddot = 0.21; // Bernoulli curvature at mean 0.7
        let bddot0 = 0.2475; // at mean 0.55
        let delta = 0.3;
        let fit = FitResult::new(
            DVector::from_column_slice(&[delta]),
            DMatrix::from_element(1, 1, bddot),
            60,
        )
        .unwrap();
        let fit0 = FitResult::new(
            DVector::from_column_slice(&[0.0]),
            DMatrix::from_element(1, 1, bddot0),
            90,
        )
        .unwrap();
        let glm =
            marginal_a0_asymptotic_glm(&fit, &fit0, &BetaParams::new(2.0, 2.0).unwrap(), &rule())
                .unwrap();
        let s = DiscrepancyScenario::new(delta, 1.5, 60).unwrap();
        let iid =
            marginal_a0_asymptotic_iid(&s, bddot, bddot0, &BetaParams::new(2.0, 2.0).unwrap(), &rule())
                .unwrap();
        for (x, y) in glm.log_densities().iter().zip(iid.log_densities()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn glm_dimension_mismatch() {
        let fit = FitResult::new(DVector::zeros(2), DMatrix::identity(2, 2), 30).unwrap();
        let fit0 = FitResult::new(DVector::zeros(1), DMatrix::identity(1, 1), 30).unwrap();
        assert!(
            marginal_a0_asymptotic_glm(&fit, &fit0, &BetaParams::uniform(), &rule()).is_err()
        );
    }

    #[test]
    fn non_finite_delta_rejected() {
        assert!(DiscrepancyScenario::new(f64::NAN, 1.0, 30).is_err());
    }
}
