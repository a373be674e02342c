//! Log-beta and related special-function helpers.

use crate::error::{Error, Result};

/// Natural log of the beta function B(a, b).
pub fn log_beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::domain(format!("log_beta_fn requires positive arguments, got ({a}, {b})")));
    }
    Ok(statrs::function::beta::ln_beta(a, b))
}

/// Log density of beta(alpha, beta) at `x` in (0, 1).
pub fn log_beta_pdf(x: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("beta pdf evaluated outside (0,1): {x}")));
    }
    Ok((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - log_beta_fn(alpha, beta)?)
}
