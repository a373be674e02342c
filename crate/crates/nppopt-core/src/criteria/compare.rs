//! Estimator comparisons for the normal i.i.d. setting: the NPP with an
//! optimal beta prior, the NPP with a two-component mixture of beta priors,
//! and a robust two-component normal mixture prior. Plus the MSE-versus-
//! prior-mean sweep over sample-size ratios.

use rayon::prelude::*;

use crate::criteria::{ModelSpec, MseConfig};
use crate::error::{Error, Result};
use crate::families::{DataSummary, NormalSummary};
use crate::npp::{
    marginal_a0_exact, marginal_a0_exact_mixture_prior, BetaParams, InitialPrior,
};
use crate::numerics::{QuadratureRule, RngStream};
use rand_distr::{Distribution, StandardNormal};

/// Candidate point estimators entering the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    OptimalBetaNpp,
    MixtureBetaNpp,
    RobustMixture,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::OptimalBetaNpp => "optimal_beta_npp",
            EstimatorKind::MixtureBetaNpp => "mixture_beta_npp",
            EstimatorKind::RobustMixture => "robust_mixture",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompareRow {
    pub d_obs: f64,
    pub candidate: EstimatorKind,
    pub mse: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub mc_se: f64,
}

/// Configuration of the estimator comparison (normal i.i.d. only).
#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub ybar0: f64,
    pub sigma2: f64,
    pub n: usize,
    pub n0: usize,
    /// Beta prior used by the optimal-NPP candidate (derive it with the MSE
    /// criterion before calling).
    pub optimal: BetaParams,
    /// Concentration of the beta mixture components beta(1,c) and beta(c,1).
    pub mixture_c: f64,
    /// Prior weight of the informative component of the robust mixture.
    pub robust_informative_weight: f64,
    pub d_obs: Vec<f64>,
    pub mc_reps: usize,
    pub stream: RngStream,
}

impl CompareConfig {
    fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || self.n < 1 || self.n0 < 1 {
            return Err(Error::validation("need sigma2 > 0 and n, n0 >= 1"));
        }
        if !(self.mixture_c > 1.0) {
            return Err(Error::validation("mixture_c must exceed 1"));
        }
        if !(0.0..=1.0).contains(&self.robust_informative_weight) {
            return Err(Error::validation("robust informative weight must be in [0,1]"));
        }
        if self.mc_reps < 100 {
            return Err(Error::validation("mc_reps must be at least 100"));
        }
        Ok(())
    }
}

/// Posterior mean of the normal mean under the robust mixture prior:
/// `w N(ybar0, sigma0^2/n0) + (1-w) N(ybar0, 100^2)` updated by the current
/// sample mean.
pub fn robust_mixture_posterior_mean(
    ybar: f64,
    n: usize,
    sigma2: f64,
    ybar0: f64,
    n0: usize,
    sigma02: f64,
    informative_weight: f64,
) -> f64 {
    const VAGUE_SD: f64 = 100.0;
    let vn = sigma2 / n as f64;
    let components = [
        (informative_weight, ybar0, sigma02 / n0 as f64),
        (1.0 - informative_weight, ybar0, VAGUE_SD * VAGUE_SD),
    ];
    let mut log_weights = [f64::NEG_INFINITY; 2];
    let mut post_means = [0.0f64; 2];
    for (k, (w, m, v)) in components.iter().enumerate() {
        let post_prec = 1.0 / vn + 1.0 / v;
        post_means[k] = (ybar / vn + m / v) / post_prec;
        if *w > 0.0 {
            // marginal likelihood of ybar under this component
            let s = vn + v;
            log_weights[k] = w.ln() - 0.5 * (ybar - m).powi(2) / s - 0.5 * s.ln();
        }
    }
    let max = log_weights[0].max(log_weights[1]);
    let w0 = (log_weights[0] - max).exp();
    let w1 = (log_weights[1] - max).exp();
    (w0 * post_means[0] + w1 * post_means[1]) / (w0 + w1)
}

/// Monte Carlo MSE table over observed-versus-historical differences for the
/// three candidate estimators. Candidates share simulated datasets within
/// each `d_obs` (common random numbers).
pub fn compare_estimators(cfg: &CompareConfig) -> Result<Vec<CompareRow>> {
    cfg.validate()?;
    let rule = QuadratureRule::default_a0();
    // the extreme mixture components need endpoint clustering
    let mix_rule = QuadratureRule::default_endpoint_transformed();
    let hist = DataSummary::Normal(NormalSummary::new(cfg.n0, cfg.ybar0, cfg.sigma2)?);
    let beta_lo = BetaParams::new(1.0, cfg.mixture_c)?;
    let beta_hi = BetaParams::new(cfg.mixture_c, 1.0)?;

    let mut rows = Vec::new();
    for (di, &d) in cfg.d_obs.iter().enumerate() {
        let mu_star = cfg.ybar0 + d;
        let se = (cfg.sigma2 / cfg.n as f64).sqrt();
        let ybars: Vec<f64> = (0..cfg.mc_reps)
            .map(|r| {
                let mut rng = cfg.stream.substream((di as u64) << 40 | r as u64).rng();
                let z: f64 = StandardNormal.sample(&mut rng);
                mu_star + se * z
            })
            .collect();
        for kind in
            [EstimatorKind::OptimalBetaNpp, EstimatorKind::MixtureBetaNpp, EstimatorKind::RobustMixture]
        {
            let means: Vec<f64> = ybars
                .par_iter()
                .map(|&ybar| -> Result<f64> {
                    match kind {
                        EstimatorKind::OptimalBetaNpp => {
                            let cur = DataSummary::Normal(NormalSummary::new(
                                cfg.n, ybar, cfg.sigma2,
                            )?);
                            let grid = marginal_a0_exact(
                                &cur,
                                &hist,
                                &cfg.optimal,
                                &InitialPrior::Flat,
                                &rule,
                            )?;
                            Ok(normal_mix_mean(&grid, ybar, cfg))
                        }
                        EstimatorKind::MixtureBetaNpp => {
                            let cur = DataSummary::Normal(NormalSummary::new(
                                cfg.n, ybar, cfg.sigma2,
                            )?);
                            let grid = marginal_a0_exact_mixture_prior(
                                &cur, &hist, &beta_lo, &beta_hi, 0.5, &mix_rule,
                            )?;
                            Ok(normal_mix_mean(&grid, ybar, cfg))
                        }
                        EstimatorKind::RobustMixture => Ok(robust_mixture_posterior_mean(
                            ybar,
                            cfg.n,
                            cfg.sigma2,
                            cfg.ybar0,
                            cfg.n0,
                            cfg.sigma2,
                            cfg.robust_informative_weight,
                        )),
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let r = means.len() as f64;
            let errs: Vec<f64> = means.iter().map(|m| m - mu_star).collect();
            let mse = errs.iter().map(|e| e * e).sum::<f64>() / r;
            let bias = errs.iter().sum::<f64>() / r;
            let var_sq = errs.iter().map(|e| (e * e - mse).powi(2)).sum::<f64>() / (r - 1.0);
            rows.push(CompareRow {
                d_obs: d,
                candidate: kind,
                mse,
                bias_sq: bias * bias,
                variance: mse - bias * bias,
                mc_se: (var_sq / r).sqrt(),
            });
        }
    }
    Ok(rows)
}

fn normal_mix_mean(grid: &crate::npp::DensityGrid, ybar: f64, cfg: &CompareConfig) -> f64 {
    let (n, n0) = (cfg.n as f64, cfg.n0 as f64);
    grid.expect(|a| {
        let prec = n / cfg.sigma2 + a * n0 / cfg.sigma2;
        (n * ybar / cfg.sigma2 + a * n0 * cfg.ybar0 / cfg.sigma2) / prec
    })
}

/// Sweep configuration: MSE at the compatible truth as a function of the
/// prior mean of a0, across current-to-historical sample-size ratios with
/// the total sample size held fixed.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub total_n: usize,
    pub ratios: Vec<f64>,
    pub prior_means: Vec<f64>,
    /// Concentration of the moment-matched prior beta(k m, k (1-m)).
    pub kappa: f64,
    pub ybar0: f64,
    pub sigma2: f64,
    pub mc_reps: usize,
    pub stream: RngStream,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub ratio: f64,
    pub n: usize,
    pub n0: usize,
    pub prior_mean: f64,
    pub mse: f64,
}

/// MSE of the NPP posterior mean at the compatible truth for each (ratio,
/// prior mean) pair.
pub fn sweep_mse_vs_prior_mean(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.total_n < 4 {
        return Err(Error::validation("total_n too small to split"));
    }
    if cfg.mc_reps < 100 {
        return Err(Error::validation("mc_reps must be at least 100"));
    }
    if !(cfg.kappa > 0.0) {
        return Err(Error::validation("kappa must be positive"));
    }
    let mut rows = Vec::new();
    for (qi, &q) in cfg.ratios.iter().enumerate() {
        if !(q > 0.0) {
            return Err(Error::validation("ratios must be positive"));
        }
        let n = ((cfg.total_n as f64 * q / (1.0 + q)).round() as usize).clamp(1, cfg.total_n - 1);
        let n0 = cfg.total_n - n;
        for &m in &cfg.prior_means {
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::validation("prior means must lie in (0,1)"));
            }
            let params = BetaParams::new(cfg.kappa * m, cfg.kappa * (1.0 - m))?;
            let mse_cfg = MseConfig {
                w: 0.5,
                mtd_shift: 0.0,
                model: ModelSpec::NormalIid { ybar0: cfg.ybar0, sigma2: cfg.sigma2, n, n0 },
                mc_reps: cfg.mc_reps,
                stream: cfg.stream.substream(qi as u64),
                rule: QuadratureRule::default_a0(),
                fixed_current_mean: false,
            };
            let pieces = crate::criteria::mse_of_posterior_mean(cfg.ybar0, &params, &mse_cfg)?;
            rows.push(SweepRow { ratio: q, n, n0, prior_mean: m, mse: pieces.mse });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vague_only_robust_prior_is_no_borrowing() {
        // informative weight zero: the posterior mean is essentially ybar,
        // so the MSE is the no-borrowing sampling variance sigma^2/n.
        let cfg = CompareConfig {
            ybar0: 1.5,
            sigma2: 1.0,
            n: 30,
            n0: 30,
            optimal: BetaParams::new(0.5, 0.5).unwrap(),
            mixture_c: 1000.0,
            robust_informative_weight: 0.0,
            d_obs: vec![0.5],
            mc_reps: 4000,
            stream: RngStream::new(5, 0),
        };
        let rows = compare_estimators(&cfg).unwrap();
        let robust = rows
            .iter()
            .find(|r| r.candidate == EstimatorKind::RobustMixture)
            .unwrap();
        let target = 1.0 / 30.0;
        assert!(
            (robust.mse - target).abs() < 3.0 * robust.mc_se + 1e-4,
            "mse {} vs {target}",
            robust.mse
        );
    }

    #[test]
    fn moment_matched_prior_mean() {
        let m = 0.37;
        let p = BetaParams::new(2.0 * m, 2.0 * (1.0 - m)).unwrap();
        assert!((p.mean() - m).abs() < 1e-10);
    }

    #[test]
    fn sweep_produces_full_table() {
        let cfg = SweepConfig {
            total_n: 60,
            ratios: vec![0.5, 2.0],
            prior_means: vec![0.25, 0.5, 0.75],
            kappa: 2.0,
            ybar0: 1.5,
            sigma2: 1.0,
            mc_reps: 200,
            stream: RngStream::new(9, 0),
        };
        let rows = sweep_mse_vs_prior_mean(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.n + r.n0, 60);
            assert!(r.mse > 0.0);
        }
    }
}
