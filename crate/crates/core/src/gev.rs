//! Generalized extreme value, generalized Pareto and normal distribution
//! primitives.
//!
//! The GEV family is parametrised by shape `xi` (the extreme value index),
//! location `mu` and scale `sigma > 0`:
//!
//! ```text
//! G(y) = exp(-(1 + xi (y - mu) / sigma)^(-1/xi))   xi != 0
//! G(y) = exp(-exp(-(y - mu) / sigma))              xi == 0
//! ```
//!
//! Shapes with `|xi| < XI_BRANCH_TOL` use the Gumbel branch. Everywhere else
//! the ratios `(exp(x) - 1) / xi` are evaluated through `expm1` so there is
//! no cancellation for small shapes.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{open01, seeded};

/// Shapes below this magnitude are treated as exactly zero.
pub const XI_BRANCH_TOL: f64 = 1e-8;

/// `expm1(x) / x`, continuous at zero.
#[inline]
pub(crate) fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// Double-log transform of a probability level, `log(-log(q))`.
#[inline]
pub fn loglog(q: f64) -> f64 {
    (-q.ln()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    xi: f64,
    mu: f64,
    sigma: f64,
}

impl GevParams {
    pub fn new(xi: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(xi.is_finite() && mu.is_finite() && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "GEV parameters must be finite (xi={xi}, mu={mu}, sigma={sigma})"
            )));
        }
        if sigma <= 0.0 {
            return Err(Error::domain(format!("GEV scale must be positive, got {sigma}")));
        }
        Ok(Self { xi, mu, sigma })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn is_gumbel(&self) -> bool {
        self.xi.abs() < XI_BRANCH_TOL
    }

    /// Upper end of the support (`+inf` unless `xi < 0`).
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && !self.is_gumbel() {
            self.mu - self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// Lower end of the support (`-inf` unless `xi > 0`).
    pub fn lower_endpoint(&self) -> f64 {
        if self.xi > 0.0 && !self.is_gumbel() {
            self.mu - self.sigma / self.xi
        } else {
            f64::NEG_INFINITY
        }
    }

    /// `-log G(y)` as a log, i.e. `log t(y)` where `G = exp(-t)`. `None`
    /// outside the support.
    fn log_t(&self, y: f64) -> Option<f64> {
        let z = (y - self.mu) / self.sigma;
        if self.is_gumbel() {
            return Some(-z);
        }
        let arg = self.xi * z;
        if arg <= -1.0 {
            return None;
        }
        Some(-arg.ln_1p() / self.xi)
    }

    /// Distribution function. Outside the support this returns the limit on
    /// that side: 0 below the lower endpoint, 1 above the upper one.
    pub fn cdf(&self, y: f64) -> f64 {
        match self.log_t(y) {
            Some(lt) => (-lt.exp()).exp(),
            None => {
                if self.xi > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match self.log_t(y) {
            Some(lt) => {
                let t = lt.exp();
                if !t.is_finite() {
                    return 0.0;
                }
                // t^(xi + 1) e^{-t} / sigma
                let v = ((self.xi + 1.0) * lt - t).exp() / self.sigma;
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            }
            None => 0.0,
        }
    }

    /// Quantile at level `q` in (0, 1).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {q}")));
        }
        Ok(self.quantile_unchecked(q))
    }

    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        let ll = loglog(q);
        if self.is_gumbel() {
            self.mu - self.sigma * ll
        } else {
            self.mu + self.sigma * (-self.xi * ll).exp_m1() / self.xi
        }
    }

    pub fn sample_with<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.quantile_unchecked(open01(rng))).collect()
    }
}

pub fn gev_cdf(p: &GevParams, y: f64) -> f64 {
    p.cdf(y)
}

pub fn gev_pdf(p: &GevParams, y: f64) -> f64 {
    p.pdf(y)
}

pub fn gev_quantile(p: &GevParams, q: f64) -> Result<f64> {
    p.quantile(q)
}

/// `n` i.i.d. draws by inverse transform of open-interval uniforms.
pub fn gev_sample(p: &GevParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    let mut rng = seeded(seed);
    Ok(p.sample_with(n, &mut rng))
}

/// Generalized Pareto tail model above a threshold `u`.
///
/// The tail probability beyond `x > u` is `zeta_u * (1 - H(x - u))`, where `H`
/// is the GP distribution with shape `xi` and scale `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    xi: f64,
    beta: f64,
    u: f64,
    zeta_u: f64,
}

impl GpParams {
    pub fn new(xi: f64, beta: f64, u: f64, zeta_u: f64) -> Result<Self> {
        if !(xi.is_finite() && beta.is_finite() && u.is_finite()) {
            return Err(Error::domain("GP parameters must be finite"));
        }
        if beta <= 0.0 {
            return Err(Error::domain(format!("GP scale must be positive, got {beta}")));
        }
        if !(zeta_u > 0.0 && zeta_u <= 1.0) {
            return Err(Error::domain(format!(
                "exceedance fraction must lie in (0,1], got {zeta_u}"
            )));
        }
        Ok(Self { xi, beta, u, zeta_u })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn threshold(&self) -> f64 {
        self.u
    }

    pub fn zeta_u(&self) -> f64 {
        self.zeta_u
    }

    /// Distribution function of the excess `x - u` given an exceedance.
    pub fn excess_cdf(&self, excess: f64) -> f64 {
        if excess <= 0.0 {
            return 0.0;
        }
        let a = self.xi * excess / self.beta;
        if self.xi.abs() < XI_BRANCH_TOL {
            return -(-excess / self.beta).exp_m1();
        }
        if a <= -1.0 {
            return 1.0;
        }
        -(-(a.ln_1p()) / self.xi).exp_m1()
    }

    /// Unconditional tail quantile at level `q > 1 - zeta_u`:
    /// `u + beta/xi * (((1-q)/zeta_u)^(-xi) - 1)`.
    pub fn tail_quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {q}")));
        }
        let log_ratio = (self.zeta_u / (1.0 - q)).ln();
        Ok(self.u + self.beta * log_ratio * exprel(self.xi * log_ratio))
    }
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("quantile level must lie in (0,1), got {q}")));
    }
    Ok(standard_normal().inverse_cdf(q))
}
