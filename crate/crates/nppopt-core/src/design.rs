//! Bayesian power simulation for two-arm trial design with normalized power
//! prior fitting priors.
//!
//! Truths are drawn from a discrete approximation to the sampling prior (the
//! historical-data posterior), current trials are simulated at each
//! candidate size, and success is a posterior probability of a positive
//! treatment effect exceeding the decision threshold.

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::criteria::{
    derive_optimal_kl, derive_optimal_mse, KlConfig, Lattice, ModelSpec, MseConfig,
};
use crate::error::{Error, Result};
use crate::families::{fit_glm_mle, simulate_design, simulate_regression, DesignSpec, FitResult, GlmFamily};
use crate::npp::{posterior_prob_coef_positive, BetaParams};
use crate::numerics::{QuadratureRule, RngStream};

/// Prior on the discounting parameter used when fitting each simulated
/// trial; optionally re-derived for every candidate sample size.
#[derive(Debug, Clone)]
pub enum FittingPrior {
    Fixed(BetaParams),
    DeriveKl { w: f64, c: f64, mtd_shift: f64 },
    DeriveMse { w: f64, mtd_shift: f64, mc_reps: usize },
}

#[derive(Debug, Clone)]
pub struct PowerConfig {
    /// Historical two-arm logistic fit (reconstructed or estimated).
    pub historical: FitResult,
    /// Control-arm response rate used when simulating current trials.
    pub control_rate: f64,
    pub candidate_n: Vec<usize>,
    pub fitting: FittingPrior,
    /// Decision threshold: success when P(beta_trt > 0 | data) > gamma.
    pub gamma: f64,
    pub reps: usize,
    /// Size of the discrete sampling-prior approximation.
    pub sampling_draws: usize,
    pub stream: RngStream,
    pub rule: QuadratureRule,
}

impl PowerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::validation("gamma must lie in (0,1)"));
        }
        if self.reps < 500 {
            return Err(Error::validation("power simulation needs reps >= 500"));
        }
        if self.sampling_draws < 1 {
            return Err(Error::validation("sampling_draws must be >= 1"));
        }
        if !(self.control_rate > 0.0 && self.control_rate < 1.0) {
            return Err(Error::validation("control rate must lie in (0,1)"));
        }
        if self.historical.p() != 2 {
            return Err(Error::validation("historical fit must be intercept + treatment"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerPoint {
    pub n: usize,
    pub power: f64,
    pub mc_se: f64,
    pub prior: BetaParams,
}

const SAMPLING_STREAM: u64 = 0x5A3F_0001;

/// Draws from the asymptotic historical-only posterior
/// `N(beta_hat0, (n0 P0)^-1)`, the discrete sampling prior.
fn sampling_prior_draws(cfg: &PowerConfig) -> Result<Vec<DVector<f64>>> {
    let prec = &cfg.historical.info * cfg.historical.n as f64;
    let cov = Cholesky::new(prec)
        .ok_or_else(|| Error::validation("historical information not positive definite"))?
        .inverse();
    let chol = Cholesky::new(cov)
        .ok_or_else(|| Error::validation("historical covariance not positive definite"))?;
    let l = chol.l();
    let mut rng = cfg.stream.substream(SAMPLING_STREAM).rng();
    let p = cfg.historical.p();
    let mut draws = Vec::with_capacity(cfg.sampling_draws);
    for _ in 0..cfg.sampling_draws {
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        draws.push(&cfg.historical.beta_hat + &l * z);
    }
    Ok(draws)
}

fn resolve_prior(cfg: &PowerConfig, n: usize) -> Result<BetaParams> {
    match &cfg.fitting {
        FittingPrior::Fixed(p) => Ok(*p),
        FittingPrior::DeriveKl { w, c, mtd_shift } => {
            let kl = KlConfig {
                w: *w,
                c: *c,
                mtd_shift: *mtd_shift,
                model: ModelSpec::LogisticTwoArm {
                    n0: cfg.historical.n,
                    effect0: cfg.historical.beta_hat[1],
                    control_rate: cfg.control_rate,
                    n,
                },
                rule: cfg.rule.clone(),
                stream: cfg.stream.substream(1),
            };
            let r = derive_optimal_kl(&kl)?;
            BetaParams::new(r.params[0], r.params[1])
        }
        FittingPrior::DeriveMse { w, mtd_shift, mc_reps } => {
            let mse = MseConfig {
                w: *w,
                mtd_shift: *mtd_shift,
                model: ModelSpec::LogisticTwoArm {
                    n0: cfg.historical.n,
                    effect0: cfg.historical.beta_hat[1],
                    control_rate: cfg.control_rate,
                    n,
                },
                mc_reps: *mc_reps,
                stream: cfg.stream.substream(2),
                rule: cfg.rule.clone(),
                fixed_current_mean: false,
            };
            let r = derive_optimal_mse(&mse, Lattice::default())?;
            BetaParams::new(r.params[0], r.params[1])
        }
    }
}

/// Estimated power at one candidate sample size.
pub fn simulate_power(cfg: &PowerConfig, n: usize) -> Result<PowerPoint> {
    cfg.validate()?;
    let prior = resolve_prior(cfg, n)?;
    let draws = sampling_prior_draws(cfg)?;
    simulate_power_with(cfg, n, prior, &draws)
}

fn simulate_power_with(
    cfg: &PowerConfig,
    n: usize,
    prior: BetaParams,
    draws: &[DVector<f64>],
) -> Result<PowerPoint> {
    let design = simulate_design(DesignSpec::TwoArm, n, cfg.stream.substream(3))?;
    let successes: usize = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<usize> {
            let stream = cfg.stream.substream((n as u64) << 24 | rep as u64);
            let mut rng = stream.rng();
            let truth = &draws[rng.random_range(0..draws.len())];
            let data = simulate_regression(truth, design.clone(), GlmFamily::Logistic, stream.substream(1))?;
            let fit = fit_glm_mle(&data)?;
            let prob =
                posterior_prob_coef_positive(&fit, &cfg.historical, &prior, &cfg.rule, 1)?;
            Ok((prob > cfg.gamma) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let power = successes as f64 / cfg.reps as f64;
    let mc_se = (power * (1.0 - power) / cfg.reps as f64).sqrt();
    Ok(PowerPoint { n, power, mc_se, prior })
}

/// Power at every candidate sample size; the fitting prior is re-derived per
/// size when the configuration asks for it. No smoothing across sizes.
pub fn power_curve(cfg: &PowerConfig) -> Result<Vec<PowerPoint>> {
    cfg.validate()?;
    let draws = sampling_prior_draws(cfg)?;
    cfg.candidate_n
        .iter()
        .map(|&n| {
            let prior = resolve_prior(cfg, n)?;
            simulate_power_with(cfg, n, prior, &draws)
        })
        .collect()
}

/// Serialize points as `n,power,mc_se`.
pub fn power_curve_csv(points: &[PowerPoint]) -> String {
    let mut out = String::from("n,power,mc_se\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.n,
            crate::npp::grid_format_sig(p.power, 12),
            crate::npp::grid_format_sig(p.mc_se, 12)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::reconstruct_two_arm_logistic;

    fn base_cfg() -> PowerConfig {
        PowerConfig {
            historical: reconstruct_two_arm_logistic(1125, 0.481, 0.5).unwrap(),
            control_rate: 0.5,
            candidate_n: vec![50],
            fitting: FittingPrior::Fixed(BetaParams::uniform()),
            gamma: 0.975,
            reps: 500,
            sampling_draws: 1000,
            stream: RngStream::new(77, 0),
            rule: QuadratureRule::default_a0(),
        }
    }

    #[test]
    fn borrowing_monotonicity_at_compatible_truth() {
        // strong positive historical effect: borrowing a lot yields more
        // power than borrowing almost nothing
        let mut cfg = base_cfg();
        cfg.fitting = FittingPrior::Fixed(BetaParams::new(1e6, 1.0).unwrap());
        let hi = simulate_power(&cfg, 50).unwrap();
        cfg.fitting = FittingPrior::Fixed(BetaParams::new(1.0, 1e6).unwrap());
        let lo = simulate_power(&cfg, 50).unwrap();
        assert!(
            hi.power > lo.power,
            "full borrowing {} <= no borrowing {}",
            hi.power,
            lo.power
        );
    }

    #[test]
    fn unattainable_threshold_kills_power() {
        let mut cfg = base_cfg();
        cfg.gamma = 0.999_999;
        let p = simulate_power(&cfg, 50).unwrap();
        assert_eq!(p.power, 0.0);
    }

    #[test]
    fn identical_seed_identical_curve() {
        let mut cfg = base_cfg();
        cfg.candidate_n = vec![40, 60];
        let a = power_curve(&cfg).unwrap();
        let b = power_curve(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.power.to_bits(), y.power.to_bits());
        }
    }

    #[test]
    fn power_monotone_in_threshold() {
        let cfg = base_cfg();
        let p_low = {
            let mut c = cfg.clone();
            c.gamma = 0.8;
            simulate_power(&c, 50).unwrap().power
        };
        let p_high = {
            let mut c = cfg.clone();
            c.gamma = 0.99;
            simulate_power(&c, 50).unwrap().power
        };
        assert!(p_high <= p_low);
    }
}
