//! Model families: exponential-family cumulants for i.i.d. data and GLM
//! fitting with per-observation Fisher information.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// One-parameter exponential families handled by the i.i.d. paths.
///
/// The normal family is parameterized on the canonical scale with unit
/// dispersion, `b(theta) = theta^2 / 2`; callers fold a known variance into
/// the curvature they pass downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IidFamily {
    NormalKnownVariance,
    Bernoulli,
}

/// Cumulant function value with its first two derivatives.
pub fn cumulant(family: IidFamily, theta: f64) -> (f64, f64, f64) {
    match family {
        IidFamily::NormalKnownVariance => (0.5 * theta * theta, theta, 1.0),
        IidFamily::Bernoulli => {
            // softplus, stable for large |theta|
            let b = if theta > 0.0 { theta + (-theta).exp().ln_1p() } else { theta.exp().ln_1p() };
            let mu = logistic(theta);
            (b, mu, mu * (1.0 - mu))
        }
    }
}

/// Inverse mean map: the canonical parameter with `b_dot(theta) = mean`.
pub fn canonical_from_mean(family: IidFamily, mean: f64) -> Result<f64> {
    match family {
        IidFamily::NormalKnownVariance => {
            if !mean.is_finite() {
                return Err(Error::domain("normal mean must be finite"));
            }
            Ok(mean)
        }
        IidFamily::Bernoulli => {
            if !(mean > 0.0 && mean < 1.0) {
                return Err(Error::domain(format!("Bernoulli mean {mean} outside (0,1)")));
            }
            Ok((mean / (1.0 - mean)).ln())
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sufficient statistics for i.i.d. normal data with known variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSummary {
    pub n: usize,
    pub ybar: f64,
    pub sigma2: f64,
}

impl NormalSummary {
    pub fn new(n: usize, ybar: f64, sigma2: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::validation("normal summary needs n >= 1"));
        }
        if !(sigma2 > 0.0) || !ybar.is_finite() {
            return Err(Error::validation("normal summary needs finite ybar and sigma2 > 0"));
        }
        Ok(NormalSummary { n, ybar, sigma2 })
    }
}

/// Sufficient statistics for i.i.d. Bernoulli data.
///
/// `successes` is real-valued so that hypothetical datasets can carry an
/// exact mean (the powered likelihood already produces fractional
/// pseudo-counts, so nothing downstream requires integers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliSummary {
    pub n: usize,
    pub successes: f64,
}

impl BernoulliSummary {
    pub fn new(n: usize, successes: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::validation("Bernoulli summary needs n >= 1"));
        }
        if !(0.0..=n as f64).contains(&successes) {
            return Err(Error::validation(format!(
                "successes {successes} outside [0, {n}]"
            )));
        }
        Ok(BernoulliSummary { n, successes })
    }

    pub fn mean(&self) -> f64 {
        self.successes / self.n as f64
    }
}

/// Either i.i.d. summary, tagged by family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSummary {
    Normal(NormalSummary),
    Bernoulli(BernoulliSummary),
}

impl DataSummary {
    pub fn n(&self) -> usize {
        match self {
            DataSummary::Normal(s) => s.n,
            DataSummary::Bernoulli(s) => s.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlmFamily {
    Logistic,
    LinearKnownVariance { sigma2: f64 },
}

/// Full design-matrix dataset for the regression paths.
#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub family: GlmFamily,
}

impl RegressionDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, family: GlmFamily) -> Result<Self> {
        let (n, p) = (x.nrows(), x.ncols());
        if y.len() != n {
            return Err(Error::Dimension(format!("X has {n} rows but Y has {} entries", y.len())));
        }
        if n <= p {
            return Err(Error::validation(format!("need n > p, got n = {n}, p = {p}")));
        }
        if let GlmFamily::LinearKnownVariance { sigma2 } = family {
            if !(sigma2 > 0.0) {
                return Err(Error::validation("linear family needs sigma2 > 0"));
            }
        }
        if matches!(family, GlmFamily::Logistic) {
            for (i, v) in y.iter().enumerate() {
                if *v != 0.0 && *v != 1.0 {
                    return Err(Error::validation(format!(
                        "logistic outcome must be 0/1; row {i} has y = {v}"
                    )));
                }
            }
        }
        // full column rank check via the Gram matrix
        let gram = x.transpose() * &x;
        if Cholesky::new(gram).is_none() {
            return Err(Error::validation("design matrix is rank deficient"));
        }
        Ok(RegressionDataset { x, y, family })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Maximum-likelihood fit with per-observation information.
///
/// `info` is (1/n) times the observed information at `beta_hat`; its inverse
/// scaled by 1/n is the asymptotic covariance of `beta_hat`.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub info: DMatrix<f64>,
    pub n: usize,
}

impl FitResult {
    pub fn new(beta_hat: DVector<f64>, info: DMatrix<f64>, n: usize) -> Result<Self> {
        if info.nrows() != info.ncols() || info.nrows() != beta_hat.len() {
            return Err(Error::Dimension("information matrix must be p x p".into()));
        }
        if Cholesky::new(info.clone()).is_none() {
            return Err(Error::validation("per-observation information is not positive definite"));
        }
        Ok(FitResult { beta_hat, info, n })
    }

    pub fn p(&self) -> usize {
        self.beta_hat.len()
    }
}

const SEPARATION_BOUND: f64 = 30.0;
const NEWTON_MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;

/// Fit a GLM by maximum likelihood.
///
/// Logistic fits run Newton-Raphson with step-halving; separation is declared
/// when the coefficient sup-norm escapes 30. The linear family is solved in
/// closed form from the normal equations.
pub fn fit_glm_mle(data: &RegressionDataset) -> Result<FitResult> {
    let n = data.n();
    match data.family {
        GlmFamily::LinearKnownVariance { sigma2 } => {
            let xtx = data.x.transpose() * &data.x;
            let xty = data.x.transpose() * &data.y;
            let chol = Cholesky::new(xtx.clone())
                .ok_or_else(|| Error::validation("rank-deficient design"))?;
            let beta = chol.solve(&xty);
            let info = xtx / (n as f64 * sigma2);
            FitResult::new(beta, info, n)
        }
        GlmFamily::Logistic => {
            let p = data.p();
            let mut beta = DVector::zeros(p);
            let mut loglik = logistic_loglik(data, &beta);
            for _ in 0..NEWTON_MAX_ITER {
                let (score, hess) = logistic_score_hess(data, &beta);
                if score.amax() <= SCORE_TOL {
                    check_boundary_fit(data, &beta)?;
                    let info = hess / n as f64;
                    return FitResult::new(beta, info, n);
                }
                let chol = Cholesky::new(hess.clone())
                    .ok_or_else(|| Error::NonConvergence("singular Hessian in Newton step".into()))?;
                let full_step = chol.solve(&score);
                let mut lambda = 1.0;
                let mut accepted = false;
                // near the optimum the true improvement drops below float
                // resolution of the log likelihood; accept those steps
                let slack = 1e-12 * (1.0 + loglik.abs());
                for _ in 0..30 {
                    let cand = &beta + lambda * &full_step;
                    let cand_ll = logistic_loglik(data, &cand);
                    if cand_ll.is_finite() && cand_ll >= loglik - slack {
                        beta = cand;
                        loglik = cand_ll.max(loglik);
                        accepted = true;
                        break;
                    }
                    lambda *= 0.5;
                }
                if !accepted {
                    return Err(Error::NonConvergence("step-halving stalled".into()));
                }
                if beta.amax() > SEPARATION_BOUND {
                    return Err(Error::NonConvergence(
                        "separation detected: coefficient escaped bound 30".into(),
                    ));
                }
            }
            let (score, hess) = logistic_score_hess(data, &beta);
            if score.amax() <= SCORE_TOL {
                check_boundary_fit(data, &beta)?;
                let info = hess / n as f64;
                return FitResult::new(beta, info, n);
            }
            Err(Error::NonConvergence(format!(
                "Newton did not reach score tolerance; |score| = {}",
                score.amax()
            )))
        }
    }
}

/// A logistic score can fall below tolerance with fitted probabilities
/// pinned to the boundary (all-equal outcomes, quasi-separation) before the
/// coefficient bound trips; such fits are separation, not convergence.
fn check_boundary_fit(data: &RegressionDataset, beta: &DVector<f64>) -> Result<()> {
    let eta = &data.x * beta;
    if eta.amax() > 20.0 {
        return Err(Error::NonConvergence(
            "separation detected: fitted probabilities at the boundary".into(),
        ));
    }
    Ok(())
}

fn logistic_loglik(data: &RegressionDataset, beta: &DVector<f64>) -> f64 {
    let eta = &data.x * beta;
    let mut ll = 0.0;
    for i in 0..data.n() {
        let (b, _, _) = cumulant(IidFamily::Bernoulli, eta[i]);
        ll += data.y[i] * eta[i] - b;
    }
    ll
}

fn logistic_score_hess(data: &RegressionDataset, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eta = &data.x * beta;
    let p = data.p();
    let mut score = DVector::zeros(p);
    let mut hess = DMatrix::zeros(p, p);
    for i in 0..data.n() {
        let mu = logistic(eta[i]);
        let w = mu * (1.0 - mu);
        let xi = data.x.row(i).transpose();
        score += (data.y[i] - mu) * &xi;
        hess += w * &xi * xi.transpose();
    }
    (score, hess)
}

/// Simulate an i.i.d. normal sample, returned as its sufficient statistics.
pub fn simulate_normal_summary(mu: f64, sigma2: f64, n: usize, stream: RngStream) -> Result<NormalSummary> {
    if !(sigma2 > 0.0) || !mu.is_finite() {
        return Err(Error::domain("simulate_normal_summary needs finite mu and sigma2 > 0"));
    }
    if n < 1 {
        return Err(Error::domain("n must be >= 1"));
    }
    let mut rng = stream.rng();
    let sd = sigma2.sqrt();
    let mut sum = 0.0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        sum += mu + sd * z;
    }
    NormalSummary::new(n, sum / n as f64, sigma2)
}

/// Simulate an i.i.d. Bernoulli sample, returned as its sufficient statistics.
pub fn simulate_bernoulli_summary(mu: f64, n: usize, stream: RngStream) -> Result<BernoulliSummary> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("Bernoulli mean {mu} outside (0,1)")));
    }
    if n < 1 {
        return Err(Error::domain("n must be >= 1"));
    }
    let mut rng = stream.rng();
    let mut s = 0u64;
    for _ in 0..n {
        if rng.random::<f64>() < mu {
            s += 1;
        }
    }
    BernoulliSummary::new(n, s as f64)
}

/// Covariate layout for simulated regression data. The intercept column is
/// always present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignSpec {
    /// `covariates` standard-normal columns.
    StandardNormal { covariates: usize },
    /// A single 0/1 arm indicator, split as evenly as n allows.
    TwoArm,
}

/// Build a design matrix for `n` subjects. Covariate draws come from the
/// given stream so a design is fixed by its seed.
pub fn simulate_design(spec: DesignSpec, n: usize, stream: RngStream) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::domain("design needs n >= 2"));
    }
    match spec {
        DesignSpec::StandardNormal { covariates } => {
            let mut rng = stream.rng();
            let p = covariates + 1;
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                x[(i, 0)] = 1.0;
                for j in 1..p {
                    x[(i, j)] = StandardNormal.sample(&mut rng);
                }
            }
            Ok(x)
        }
        DesignSpec::TwoArm => {
            let mut x = DMatrix::zeros(n, 2);
            let half = n / 2;
            for i in 0..n {
                x[(i, 0)] = 1.0;
                x[(i, 1)] = if i < half { 0.0 } else { 1.0 };
            }
            Ok(x)
        }
    }
}

/// Simulate outcomes for a fixed design under the stated coefficients.
pub fn simulate_regression(
    beta: &DVector<f64>,
    x: DMatrix<f64>,
    family: GlmFamily,
    stream: RngStream,
) -> Result<RegressionDataset> {
    if beta.len() != x.ncols() {
        return Err(Error::Dimension("beta length must match design columns".into()));
    }
    let mut rng = stream.rng();
    let eta = &x * beta;
    let n = x.nrows();
    let mut y = DVector::zeros(n);
    match family {
        GlmFamily::Logistic => {
            for i in 0..n {
                y[i] = if rng.random::<f64>() < logistic(eta[i]) { 1.0 } else { 0.0 };
            }
        }
        GlmFamily::LinearKnownVariance { sigma2 } => {
            if !(sigma2 > 0.0) {
                return Err(Error::domain("sigma2 must be positive"));
            }
            let sd = sigma2.sqrt();
            for i in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                y[i] = eta[i] + sd * z;
            }
        }
    }
    RegressionDataset::new(x, y, family)
}

/// Reconstruct an intercept-plus-treatment logistic fit from trial summary
/// statistics: total `n`, treatment log odds ratio `effect`, 1:1 allocation
/// and the given control response rate.
pub fn reconstruct_two_arm_logistic(n: usize, effect: f64, control_rate: f64) -> Result<FitResult> {
    if n < 2 {
        return Err(Error::validation("two-arm reconstruction needs n >= 2"));
    }
    if !(control_rate > 0.0 && control_rate < 1.0) {
        return Err(Error::validation(format!("control rate {control_rate} outside (0,1)")));
    }
    if !effect.is_finite() {
        return Err(Error::validation("effect must be finite"));
    }
    let intercept = (control_rate / (1.0 - control_rate)).ln();
    let p_c = control_rate;
    let p_t = logistic(intercept + effect);
    let w_c = p_c * (1.0 - p_c);
    let w_t = p_t * (1.0 - p_t);
    // per-observation information under a 1:1 split
    let info = DMatrix::from_row_slice(
        2,
        2,
        &[0.5 * (w_c + w_t), 0.5 * w_t, 0.5 * w_t, 0.5 * w_t],
    );
    FitResult::new(DVector::from_column_slice(&[intercept, effect]), info, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bernoulli_cumulant_at_zero() {
        let (b, bd, bdd) = cumulant(IidFamily::Bernoulli, 0.0);
        assert_abs_diff_eq!(b, std::f64::consts::LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(bd, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(bdd, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn normal_cumulant_is_quadratic() {
        let (b, bd, bdd) = cumulant(IidFamily::NormalKnownVariance, 1.5);
        assert_abs_diff_eq!(b, 1.125, epsilon = 1e-14);
        assert_abs_diff_eq!(bd, 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(bdd, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_map_inverts() {
        let th = canonical_from_mean(IidFamily::Bernoulli, 0.7).unwrap();
        assert_abs_diff_eq!(th, (7.0f64 / 3.0).ln(), epsilon = 1e-12);
        let (_, bd, _) = cumulant(IidFamily::Bernoulli, th);
        assert_abs_diff_eq!(bd, 0.7, epsilon = 1e-12);
        assert!(canonical_from_mean(IidFamily::Bernoulli, 0.0).is_err());
        assert!(canonical_from_mean(IidFamily::Bernoulli, 1.0).is_err());
        assert_abs_diff_eq!(
            canonical_from_mean(IidFamily::NormalKnownVariance, 1.5).unwrap(),
            1.5
        );
    }

    #[test]
    fn intercept_only_logistic_matches_logit() {
        let x = DMatrix::from_element(30, 1, 1.0);
        let mut y = DVector::zeros(30);
        for i in 0..21 {
            y[i] = 1.0;
        }
        let data = RegressionDataset::new(x, y, GlmFamily::Logistic).unwrap();
        let fit = fit_glm_mle(&data).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], (21.0f64 / 9.0).ln(), epsilon = 1e-8);
        // info = mean of mu(1-mu) = 0.7*0.3
        assert_abs_diff_eq!(fit.info[(0, 0)], 0.21, epsilon = 1e-8);
    }

    #[test]
    fn linear_fit_matches_normal_equations() {
        let stream = RngStream::new(11, 0);
        let x = simulate_design(DesignSpec::StandardNormal { covariates: 1 }, 30, stream).unwrap();
        let beta = DVector::from_column_slice(&[1.5, -1.0]);
        let data = simulate_regression(
            &beta,
            x.clone(),
            GlmFamily::LinearKnownVariance { sigma2: 1.0 },
            stream.substream(1),
        )
        .unwrap();
        let fit = fit_glm_mle(&data).unwrap();
        // closed-form (X'X)^{-1} X'Y oracle
        let xtx = x.transpose() * &x;
        let oracle = Cholesky::new(xtx).unwrap().solve(&(x.transpose() * &data.y));
        assert!((fit.beta_hat.clone() - oracle).amax() < 1e-8);
        // sampling-distribution check: within 4 standard errors of truth
        let cov = Cholesky::new(fit.info.clone() * fit.n as f64).unwrap().inverse();
        for j in 0..2 {
            let se = cov[(j, j)].sqrt();
            assert!((fit.beta_hat[j] - beta[j]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn separation_is_reported() {
        let mut x = DMatrix::zeros(10, 2);
        for i in 0..10 {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = i as f64;
        }
        let y = DVector::from_fn(10, |i, _| if i < 5 { 0.0 } else { 1.0 });
        let data = RegressionDataset::new(x, y, GlmFamily::Logistic).unwrap();
        match fit_glm_mle(&data) {
            Err(Error::NonConvergence(_)) => {}
            other => panic!("expected separation error, got {other:?}"),
        }
    }

    #[test]
    fn all_equal_outcomes_fail_to_converge() {
        let x = DMatrix::from_element(12, 1, 1.0);
        let y = DVector::from_element(12, 1.0);
        let data = RegressionDataset::new(x, y, GlmFamily::Logistic).unwrap();
        assert!(matches!(fit_glm_mle(&data), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn simulation_is_reproducible() {
        let s = RngStream::new(42, 9);
        let a = simulate_normal_summary(1.5, 1.0, 30, s).unwrap();
        let b = simulate_normal_summary(1.5, 1.0, 30, s).unwrap();
        assert_eq!(a.ybar.to_bits(), b.ybar.to_bits());
    }

    #[test]
    fn bernoulli_law_of_large_numbers() {
        let s = RngStream::new(3, 1);
        let sum = simulate_bernoulli_summary(0.7, 1_000_000, s).unwrap();
        // tolerance 4 sqrt(pq/n)
        assert!((sum.mean() - 0.7).abs() < 4.0 * (0.7f64 * 0.3 / 1e6).sqrt());
    }

    #[test]
    fn invalid_truth_is_domain_error() {
        assert!(simulate_bernoulli_summary(1.2, 10, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn two_arm_reconstruction_at_half_control() {
        let fit = reconstruct_two_arm_logistic(1125, 0.481, 0.5).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.beta_hat[1], 0.481, epsilon = 1e-14);
        // treatment-arm rate
        let pt = 1.0 / (1.0 + (-0.481f64).exp());
        assert_abs_diff_eq!(fit.info[(1, 1)], 0.5 * pt * (1.0 - pt), epsilon = 1e-12);
    }
}
