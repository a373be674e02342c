//! Closed-form limiting densities of the discounting-parameter posterior and
//! numerical checks of its limit behaviour.

use crate::error::{Error, Result};
use crate::families::NormalSummary;
use crate::npp::{
    marginal_a0_asymptotic_iid, marginal_a0_exact, BetaParams, DensityGrid, DiscrepancyScenario,
    InitialPrior,
};
use crate::families::DataSummary;
use crate::numerics::QuadratureRule;

/// Limiting density for compatible i.i.d. data:
/// proportional to `sqrt(r a / (r a + 1))` times the prior.
pub fn limiting_density_iid(r: f64, prior: &BetaParams, rule: &QuadratureRule) -> Result<DensityGrid> {
    if !(r > 0.0) {
        return Err(Error::domain("r must be positive"));
    }
    let prior = *prior;
    DensityGrid::from_log_kernel(rule.clone(), move |a| {
        prior.log_pdf(a) + 0.5 * (r * a / (r * a + 1.0)).ln()
    })
}

/// Limiting density for a compatible GLM with `p` coefficients:
/// proportional to `(a / (a + 1))^(p/2)` times the prior.
pub fn limiting_density_glm(p: usize, prior: &BetaParams, rule: &QuadratureRule) -> Result<DensityGrid> {
    if p < 1 {
        return Err(Error::domain("p must be >= 1"));
    }
    let prior = *prior;
    let half_p = p as f64 / 2.0;
    DensityGrid::from_log_kernel(rule.clone(), move |a| {
        prior.log_pdf(a) + half_p * (a / (a + 1.0)).ln()
    })
}

/// Fixed-sample normal setting for the CDF dominance check.
#[derive(Debug, Clone, Copy)]
pub struct NormalPair {
    pub n: usize,
    pub n0: usize,
    pub sigma2: f64,
    pub sigma02: f64,
    pub ybar0: f64,
}

/// Minimum over interior grid nodes of `F_d(a0) - F_0(a0)` for the i.i.d.
/// normal model: positive for every conflict `d > 0`.
///
/// The first and last nodes are excluded; at the endpoints both CDFs agree
/// by construction.
pub fn check_cdf_dominance(
    d: f64,
    base: &NormalPair,
    prior: &BetaParams,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain("dominance check needs d > 0"));
    }
    let hist = DataSummary::Normal(NormalSummary::new(base.n0, base.ybar0, base.sigma02)?);
    let cur_d = DataSummary::Normal(NormalSummary::new(base.n, base.ybar0 + d, base.sigma2)?);
    let cur_0 = DataSummary::Normal(NormalSummary::new(base.n, base.ybar0, base.sigma2)?);
    let grid_d = marginal_a0_exact(&cur_d, &hist, prior, &InitialPrior::Flat, rule)?;
    let grid_0 = marginal_a0_exact(&cur_0, &hist, prior, &InitialPrior::Flat, rule)?;
    let f_d = grid_d.cdf();
    let f_0 = grid_0.cdf();
    let len = f_d.len();
    if len < 3 {
        return Err(Error::validation("rule too coarse for a dominance check"));
    }
    Ok(f_d[1..len - 1]
        .iter()
        .zip(&f_0[1..len - 1])
        .map(|(a, b)| a - b)
        .fold(f64::INFINITY, f64::min))
}

/// Mass of the discounting-parameter posterior below epsilon along an
/// increasing sample-size schedule.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub schedule: Vec<usize>,
    pub mass_below_eps: Vec<f64>,
    pub epsilon: f64,
}

impl ConvergenceReport {
    pub fn is_monotone_increasing(&self) -> bool {
        self.mass_below_eps.windows(2).all(|w| w[1] > w[0])
    }

    /// Serialize as `n,mass_below_eps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,mass_below_eps\n");
        for (n, m) in self.schedule.iter().zip(&self.mass_below_eps) {
            out.push_str(&format!("{n},{}\n", crate::npp::grid_format_sig(*m, 12)));
        }
        out
    }
}

/// Point-mass-at-zero diagnostic: evaluates the asymptotic i.i.d. kernel at
/// each schedule size (unit curvatures, the normal scale) and records the
/// posterior mass below `epsilon`.
pub fn convergence_diagnostic(
    delta: f64,
    r: f64,
    schedule: &[usize],
    epsilon: f64,
    prior: &BetaParams,
    rule: &QuadratureRule,
) -> Result<ConvergenceReport> {
    if delta == 0.0 {
        return Err(Error::domain(
            "delta must be nonzero; the compatible case has its own limiting density",
        ));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain("epsilon must lie in (0,1)"));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) || schedule.is_empty() {
        return Err(Error::domain("schedule must be strictly increasing and non-empty"));
    }
    let mut mass = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let scenario = DiscrepancyScenario::new(delta, r, n)?;
        let grid = marginal_a0_asymptotic_iid(&scenario, 1.0, 1.0, prior, rule)?;
        mass.push(grid.mass_below(epsilon));
    }
    Ok(ConvergenceReport { schedule: schedule.to_vec(), mass_below_eps: mass, epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rule() -> QuadratureRule {
        QuadratureRule::default_a0()
    }

    #[test]
    fn iid_limit_density_ratio() {
        let g = limiting_density_iid(1.0, &BetaParams::uniform(), &rule()).unwrap();
        // density(1)/density(0.5) = sqrt(1/2)/sqrt(1/3) = sqrt(1.5)
        let d = |target: f64| {
            let i = g
                .nodes()
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - target).abs().partial_cmp(&(b.1 - target).abs()).unwrap()
                })
                .unwrap()
                .0;
            (g.nodes()[i], g.log_densities()[i])
        };
        let (a1, ld1) = d(1.0);
        let (a5, ld5) = d(0.5);
        let expected = 0.5 * ((a1 / (a1 + 1.0)).ln() - (a5 / (a5 + 1.0)).ln());
        assert_abs_diff_eq!(ld1 - ld5, expected, epsilon = 1e-12);
    }

    #[test]
    fn iid_limit_flattens_for_huge_r() {
        let g = limiting_density_iid(1e6, &BetaParams::uniform(), &rule()).unwrap();
        let sup = g
            .densities()
            .iter()
            .map(|d| (d - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(sup <= 1e-2, "sup distance to uniform {sup}");
    }

    #[test]
    fn increasing_prior_pushes_mode_to_one() {
        let g = limiting_density_iid(1.0, &BetaParams::new(10.0, 1.0).unwrap(), &rule()).unwrap();
        let dens = g.densities();
        let argmax = dens
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, g.len() - 1);
    }

    #[test]
    fn glm_limit_equals_iid_at_p1() {
        let a = limiting_density_glm(1, &BetaParams::uniform(), &rule()).unwrap();
        let b = limiting_density_iid(1.0, &BetaParams::uniform(), &rule()).unwrap();
        for (x, y) in a.log_densities().iter().zip(b.log_densities()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn glm_limit_exponent_one_at_p2() {
        let g = limiting_density_glm(2, &BetaParams::uniform(), &rule()).unwrap();
        let ref_grid =
            DensityGrid::from_log_kernel(rule(), |a| (a / (a + 1.0)).ln()).unwrap();
        for (x, y) in g.log_densities().iter().zip(ref_grid.log_densities()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn overfitting_limit_concentrates_at_one() {
        let g = limiting_density_glm(200, &BetaParams::uniform(), &rule()).unwrap();
        let mass_above = 1.0 - g.mass_below(0.9);
        assert!(mass_above > 0.95, "mass above 0.9 is {mass_above}");
    }

    #[test]
    fn dominance_rejects_non_positive_d() {
        let base = NormalPair { n: 30, n0: 30, sigma2: 1.0, sigma02: 1.0, ybar0: 1.5 };
        assert!(check_cdf_dominance(0.0, &base, &BetaParams::uniform(), &rule()).is_err());
    }

    #[test]
    fn dominance_positive_for_conflict() {
        let base = NormalPair { n: 30, n0: 30, sigma2: 1.0, sigma02: 1.0, ybar0: 1.5 };
        let min = check_cdf_dominance(0.5, &base, &BetaParams::uniform(), &rule()).unwrap();
        assert!(min > 0.0);
    }

    #[test]
    fn dominance_grows_with_d() {
        // F_d increases in d pointwise; compare at the node closest to 0.5.
        let base = NormalPair { n: 30, n0: 30, sigma2: 1.0, sigma02: 1.0, ybar0: 1.5 };
        let at_half = |d: f64| {
            let hist = DataSummary::Normal(NormalSummary::new(30, 1.5, 1.0).unwrap());
            let cur = DataSummary::Normal(NormalSummary::new(30, 1.5 + d, 1.0).unwrap());
            let g = marginal_a0_exact(&cur, &hist, &BetaParams::uniform(), &InitialPrior::Flat, &rule())
                .unwrap();
            let idx = g
                .nodes()
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - 0.5).abs().partial_cmp(&(b.1 - 0.5).abs()).unwrap())
                .unwrap()
                .0;
            g.cdf()[idx]
        };
        let f0 = at_half(1e-12);
        assert!(at_half(1.5) - f0 > at_half(0.5) - f0);
        let _ = base;
    }

    #[test]
    fn convergence_masses_increase() {
        let rep = convergence_diagnostic(
            0.5,
            1.0,
            &[30, 50, 100, 200],
            0.1,
            &BetaParams::uniform(),
            &rule(),
        )
        .unwrap();
        assert!(rep.is_monotone_increasing());
        assert!(rep.mass_below_eps[3] > 0.5);
    }

    #[test]
    fn larger_conflict_concentrates_faster() {
        let at = |delta: f64| {
            convergence_diagnostic(delta, 1.0, &[30], 0.1, &BetaParams::uniform(), &rule())
                .unwrap()
                .mass_below_eps[0]
        };
        assert!(at(2.0) > at(0.5));
    }

    #[test]
    fn zero_delta_rejected() {
        assert!(convergence_diagnostic(0.0, 1.0, &[30, 50], 0.1, &BetaParams::uniform(), &rule())
            .is_err());
    }
}
