//! Extreme-value risk analysis of high-frequency returns.
//!
//! Minute bars are filtered, resampled and standardized ([`returns`]), cut
//! into block maxima ([`maxima`]) and fitted with a quantile-based GEV
//! estimator ([`estimators`]) on rolling windows ([`risk`]). The fits drive
//! VaR portfolios ([`var`]), changepoint and jump detection
//! ([`changepoint`]), and are validated on simulated Heston paths
//! ([`heston`]).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod changepoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod gev;
pub mod heston;
pub mod maxima;
pub mod pipeline;
pub mod returns;
pub mod risk;
pub mod rng;
pub mod stats;
pub mod synthetic;
pub mod var;

pub use error::{Error, Result};

/// Shortest round-trip text for a CSV cell; exponent form for very small
/// or very large magnitudes.
pub(crate) fn num(x: f64) -> String {
    if x != 0.0 && x.is_finite() && !(1e-5..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
