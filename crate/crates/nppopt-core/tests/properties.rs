//! Property tests for the numerical and statistical contracts.

use proptest::prelude::*;

use nppopt_core::criteria::{kl_divergence, ModelSpec, MseConfig};
use nppopt_core::families::{
    canonical_from_mean, cumulant, fit_glm_mle, simulate_design, simulate_regression, DesignSpec,
    GlmFamily, IidFamily, NormalSummary,
};
use nppopt_core::npp::{marginal_a0_exact, BetaParams, DensityGrid, InitialPrior};
use nppopt_core::families::DataSummary;
use nppopt_core::numerics::{integrate_unit, log_beta_pdf, QuadratureRule, RngStream};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_map_round_trips(mean in 1e-6f64..1.0 - 1e-6) {
        let theta = canonical_from_mean(IidFamily::Bernoulli, mean).unwrap();
        let (_, bdot, bddot) = cumulant(IidFamily::Bernoulli, theta);
        prop_assert!((bdot - mean).abs() < 1e-10);
        prop_assert!(bddot > 0.0);
    }

    #[test]
    fn cumulant_curvature_positive(theta in -30.0f64..30.0) {
        let (_, _, bddot) = cumulant(IidFamily::Bernoulli, theta);
        prop_assert!(bddot > 0.0);
        let (_, _, bddot_n) = cumulant(IidFamily::NormalKnownVariance, theta);
        prop_assert!(bddot_n > 0.0);
    }

    #[test]
    fn quadrature_integrates_polynomials(coeffs in proptest::collection::vec(-3.0f64..3.0, 1..6)) {
        let rule = QuadratureRule::default_a0();
        let got = integrate_unit(
            |x| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            &rule,
        )
        .unwrap();
        let want: f64 = coeffs.iter().enumerate().map(|(k, c)| c / (k as f64 + 1.0)).sum();
        prop_assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn marginal_grids_always_normalized(
        alpha in 0.2f64..20.0,
        beta in 0.2f64..20.0,
        d in -2.0f64..2.0,
    ) {
        let rule = QuadratureRule::default_a0();
        let prior = BetaParams::new(alpha, beta).unwrap();
        let hist = DataSummary::Normal(NormalSummary::new(30, 1.5, 1.0).unwrap());
        let cur = DataSummary::Normal(NormalSummary::new(30, 1.5 + d, 1.0).unwrap());
        let g = marginal_a0_exact(&cur, &hist, &prior, &InitialPrior::Flat, &rule).unwrap();
        prop_assert!((g.integral() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn kl_is_non_negative(
        pa in 0.5f64..10.0,
        pb in 0.5f64..10.0,
        qa in 0.5f64..10.0,
        qb in 0.5f64..10.0,
    ) {
        let rule = QuadratureRule::default_a0();
        let p = BetaParams::new(pa, pb).unwrap();
        let grid = DensityGrid::from_log_kernel(rule, |x| p.log_pdf(x)).unwrap();
        let v = kl_divergence(&grid, |x| log_beta_pdf(x, qa, qb).unwrap()).unwrap();
        prop_assert!(v >= -1e-8, "KL = {v}");
    }

    #[test]
    fn normal_summary_simulation_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        let s = RngStream::new(seed, stream);
        let a = nppopt_core::families::simulate_normal_summary(0.3, 2.0, 25, s).unwrap();
        let b = nppopt_core::families::simulate_normal_summary(0.3, 2.0, 25, s).unwrap();
        prop_assert_eq!(a.ybar.to_bits(), b.ybar.to_bits());
    }
}

#[test]
fn kl_continuity_probe() {
    // perturbing the hyperparameters by 1e-4 moves the objective by no more
    // than 1e-2 across a spread of test points
    use nppopt_core::criteria::{kl_objective, KlConfig};
    let cfg = KlConfig {
        w: 0.5,
        c: 10.0,
        mtd_shift: 1.0,
        model: ModelSpec::NormalIid { ybar0: 1.5, sigma2: 1.0, n: 30, n0: 30 },
        rule: QuadratureRule::default_a0(),
        stream: RngStream::new(0, 0),
    };
    let mut checked = 0;
    for i in 0..5 {
        for j in 0..4 {
            let a = 0.3 + 0.9 * i as f64;
            let b = 0.3 + 1.1 * j as f64;
            let base = kl_objective(&BetaParams::new(a, b).unwrap(), &cfg).unwrap();
            let bumped = kl_objective(&BetaParams::new(a + 1e-4, b + 1e-4).unwrap(), &cfg).unwrap();
            assert!(
                (base - bumped).abs() <= 1e-2,
                "objective jumped by {} at ({a},{b})",
                (base - bumped).abs()
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 20);
}

#[test]
fn common_random_numbers_shrink_paired_differences() {
    use nppopt_core::criteria::mse_objective;
    let base = |stream: RngStream| MseConfig {
        w: 0.5,
        mtd_shift: 1.0,
        model: ModelSpec::NormalIid { ybar0: 1.5, sigma2: 1.0, n: 30, n0: 30 },
        mc_reps: 400,
        stream,
        rule: QuadratureRule::default_a0(),
        fixed_current_mean: false,
    };
    let p1 = BetaParams::new(1.0, 1.0).unwrap();
    let p2 = BetaParams::new(1.5, 1.0).unwrap();
    // paired (common random numbers) differences across replicate seeds
    let mut paired = Vec::new();
    let mut independent = Vec::new();
    for k in 0..24u64 {
        let crn = base(RngStream::new(1000 + k, 0));
        let d_crn = mse_objective(&p1, &crn).unwrap() - mse_objective(&p2, &crn).unwrap();
        paired.push(d_crn);
        let cfg_a = base(RngStream::new(1000 + k, 1));
        let cfg_b = base(RngStream::new(1000 + k, 2));
        let d_ind = mse_objective(&p1, &cfg_a).unwrap() - mse_objective(&p2, &cfg_b).unwrap();
        independent.push(d_ind);
    }
    let sd = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
    };
    assert!(
        sd(&paired) < sd(&independent),
        "paired sd {} not below independent sd {}",
        sd(&paired),
        sd(&independent)
    );
}

#[test]
fn glm_mle_recovers_truth_within_five_se() {
    // simulated logistic data at n = 100_000: the estimate must fall within
    // five standard errors (from the per-observation information) of the
    // truth in at least 99% of replications
    let beta = nalgebra::DVector::from_column_slice(&[0.4, -0.8]);
    let mut hits = 0;
    let reps = 40;
    for k in 0..reps {
        let stream = RngStream::new(5_000 + k, 0);
        let x =
            simulate_design(DesignSpec::StandardNormal { covariates: 1 }, 100_000, stream).unwrap();
        let data =
            simulate_regression(&beta, x, GlmFamily::Logistic, stream.substream(1)).unwrap();
        let fit = fit_glm_mle(&data).unwrap();
        let cov = nalgebra::Cholesky::new(fit.info.clone() * fit.n as f64).unwrap().inverse();
        let ok = (0..2).all(|j| (fit.beta_hat[j] - beta[j]).abs() < 5.0 * cov[(j, j)].sqrt());
        hits += ok as usize;
    }
    assert!(hits as f64 / reps as f64 >= 0.99, "{hits}/{reps} within 5 SE");
}
