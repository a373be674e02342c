//! Quadrature, minimization, special functions and reproducible RNG streams.
//!
//! All operations here are pure given their inputs and safe to call from
//! many threads.

mod optim;
mod quadrature;
mod rng;
mod special;

pub use optim::{
    golden_section_min, grid_search_min, log_box_penalty, minimize_beta_hyperparams,
    nelder_mead_min, OptimResult, LOG_BOX_HI, LOG_BOX_LO,
};
pub use quadrature::{integrate_unit, QuadratureRule, RuleKind, ENDPOINT_EPS};
pub use rng::RngStream;
pub use special::{log_beta_fn, log_beta_pdf};
