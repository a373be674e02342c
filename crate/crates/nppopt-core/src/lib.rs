//! Normalized power prior toolkit: marginal posteriors of the discounting
//! parameter under exact, asymptotic-normal and Laplace computational paths,
//! limiting-behaviour diagnostics, and optimal beta priors on the
//! discounting parameter by KL-divergence and mean-squared-error criteria,
//! with power simulation for two-arm trial design.

pub mod asymptotics;
pub mod criteria;
pub mod design;
pub mod error;
pub mod families;
pub mod npp;
pub mod numerics;

pub use error::{Error, Result};
