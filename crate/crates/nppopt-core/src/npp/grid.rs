//! Discretized density of the discounting parameter on (0, 1).

use crate::error::{Error, Result};
use crate::numerics::QuadratureRule;

/// A normalized density over the quadrature nodes of its rule.
///
/// Values are immutable after construction. The grid integrates to one under
/// its own rule: `sum_i w_i exp(log_density_i) = 1` within 1e-8.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    rule: QuadratureRule,
    log_density: Vec<f64>,
    normalized: bool,
}

impl DensityGrid {
    /// Evaluate an unnormalized log kernel at every node and normalize.
    ///
    /// A non-finite kernel value is an error naming the offending node.
    pub fn from_log_kernel(rule: QuadratureRule, mut log_kernel: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut log_density = Vec::with_capacity(rule.len());
        for (i, &a0) in rule.nodes().iter().enumerate() {
            let v = log_kernel(a0);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    node: i,
                    a0,
                    what: format!("log kernel = {v}"),
                });
            }
            log_density.push(v);
        }
        Self::from_log_values(rule, log_density)
    }

    /// Normalize precomputed log-kernel values taken at the rule's nodes.
    pub fn from_log_values(rule: QuadratureRule, mut log_density: Vec<f64>) -> Result<Self> {
        if log_density.len() != rule.len() {
            return Err(Error::Dimension(format!(
                "{} log-kernel values for a {}-node rule",
                log_density.len(),
                rule.len()
            )));
        }
        for (i, (&a0, v)) in rule.nodes().iter().zip(&log_density).enumerate() {
            if !v.is_finite() {
                return Err(Error::Evaluation { node: i, a0, what: format!("log kernel = {v}") });
            }
        }
        let max = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_density
            .iter()
            .zip(rule.weights())
            .map(|(ld, w)| w * (ld - max).exp())
            .sum();
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::NonConvergence(format!("kernel normalizer degenerate: {z}")));
        }
        let log_z = max + z.ln();
        for ld in &mut log_density {
            *ld -= log_z;
        }
        Ok(DensityGrid { rule, log_density, normalized: true })
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        self.rule.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        self.rule.weights()
    }

    pub fn log_densities(&self) -> &[f64] {
        &self.log_density
    }

    pub fn densities(&self) -> Vec<f64> {
        self.log_density.iter().map(|v| v.exp()).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.log_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_density.is_empty()
    }

    /// `sum_i w_i d_i` — should be 1 within 1e-8 for a normalized grid.
    pub fn integral(&self) -> f64 {
        self.rule
            .weights()
            .iter()
            .zip(&self.log_density)
            .map(|(w, ld)| w * ld.exp())
            .sum()
    }

    /// Expectation of `f(a0)` under the grid.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.rule
            .nodes()
            .iter()
            .zip(self.rule.weights())
            .zip(&self.log_density)
            .map(|((&x, &w), ld)| w * ld.exp() * f(x))
            .sum()
    }

    pub fn mean_a0(&self) -> f64 {
        self.expect(|a| a)
    }

    /// Cumulative distribution at each node (inclusive of the node's own
    /// weight); the final entry equals the total integral.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.rule
            .weights()
            .iter()
            .zip(&self.log_density)
            .map(|(w, ld)| {
                acc += w * ld.exp();
                acc
            })
            .collect()
    }

    /// Mass carried by nodes strictly below `eps`.
    pub fn mass_below(&self, eps: f64) -> f64 {
        self.rule
            .nodes()
            .iter()
            .zip(self.rule.weights())
            .zip(&self.log_density)
            .filter(|((&x, _), _)| x < eps)
            .map(|((_, &w), ld)| w * ld.exp())
            .sum()
    }

    /// Serialize as `a0,density,cdf` with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a0,density,cdf\n");
        let cdf = self.cdf();
        for ((&a0, ld), c) in self.nodes().iter().zip(&self.log_density).zip(&cdf) {
            out.push_str(&format!(
                "{},{},{}\n",
                format_sig(a0, 12),
                format_sig(ld.exp(), 12),
                format_sig(*c, 12)
            ));
        }
        out
    }
}

/// Decimal formatting with a fixed number of significant digits.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).clamp(0, 320) as usize;
    format!("{x:.decimals$}")
}
