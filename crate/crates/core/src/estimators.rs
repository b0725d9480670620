//! Quantile-based GEV estimators.
//!
//! A quantile triple `q1 < q2 < q3` determines the shape through the ratio of
//! quantile spacings, which does not depend on location or scale:
//!
//! ```text
//! (Q3 - Q2) / (Q2 - Q1) = R(xi) = (e^{-xi L3} - e^{-xi L2}) / (e^{-xi L2} - e^{-xi L1}),
//! L_i = log(-log q_i)
//! ```
//!
//! `R` is continuous and strictly increasing, so each triple yields one shape
//! estimate by inverting `R` at the empirical spacing ratio. Several triples
//! are combined with the weights that minimise the asymptotic variance of the
//! combination. That variance comes from the delta method applied to the
//! joint normal law of empirical quantiles,
//! `n Cov(Q̂a, Q̂b) -> (min(qa, qb) - qa qb) / (g(Qa) g(Qb))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{exprel, loglog, GevParams};

/// Smallest sample accepted by the shape estimators.
pub const MIN_SAMPLE: usize = 30;
/// Search interval for the shape.
pub const XI_BRACKET: (f64, f64) = (-10.0, 10.0);
const ROOT_TOL: f64 = 1e-10;
/// Covariance matrices above this condition number fall back to uniform weights.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct QuantileTriple {
    levels: [f64; 3],
}

impl QuantileTriple {
    pub fn new(q1: f64, q2: f64, q3: f64) -> Result<Self> {
        let ok = q1 > 0.0 && q1 < q2 && q2 < q3 && q3 < 1.0;
        if !ok {
            return Err(Error::domain(format!(
                "quantile triple must satisfy 0 < q1 < q2 < q3 < 1, got ({q1}, {q2}, {q3})"
            )));
        }
        Ok(Self { levels: [q1, q2, q3] })
    }

    pub fn levels(&self) -> [f64; 3] {
        self.levels
    }

    pub fn loglogs(&self) -> [f64; 3] {
        self.levels.map(loglog)
    }
}

impl TryFrom<[f64; 3]> for QuantileTriple {
    type Error = Error;

    fn try_from(q: [f64; 3]) -> Result<Self> {
        QuantileTriple::new(q[0], q[1], q[2])
    }
}

impl From<QuantileTriple> for [f64; 3] {
    fn from(t: QuantileTriple) -> Self {
        t.levels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Optimized,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiQuantileConfig {
    pub triples: Vec<QuantileTriple>,
    #[serde(default)]
    pub weight_mode: WeightMode,
    /// Triple used to recover location and scale once the shape is fixed.
    #[serde(default = "default_central")]
    pub central: QuantileTriple,
}

fn default_central() -> QuantileTriple {
    QuantileTriple { levels: [0.25, 0.5, 0.75] }
}

impl Default for MultiQuantileConfig {
    fn default() -> Self {
        let triples = [(0.10, 0.90), (0.15, 0.85), (0.20, 0.80), (0.25, 0.75), (0.30, 0.70)]
            .iter()
            .map(|&(lo, hi)| QuantileTriple { levels: [lo, 0.5, hi] })
            .collect();
        Self { triples, weight_mode: WeightMode::Optimized, central: default_central() }
    }
}

impl MultiQuantileConfig {
    pub fn single(triple: QuantileTriple) -> Self {
        Self { triples: vec![triple], weight_mode: WeightMode::Optimized, central: triple }
    }

    pub fn validate(&self) -> Result<()> {
        if self.triples.is_empty() {
            return Err(Error::domain("at least one quantile triple is required"));
        }
        for (i, a) in self.triples.iter().enumerate() {
            QuantileTriple::try_from(a.levels)?;
            if self.triples[..i].contains(a) {
                return Err(Error::domain(format!("duplicate quantile triple {:?}", a.levels)));
            }
        }
        QuantileTriple::try_from(self.central.levels)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: GevParams,
    /// Weights over the triples that produced an estimate, in config order.
    pub weights: Vec<f64>,
    /// Asymptotic variance of `sqrt(n) (xi_hat - xi)`.
    pub xi_variance: f64,
    pub sample_size: usize,
    /// Per-triple shape estimates, `None` where the triple failed.
    pub triple_xis: Vec<Option<f64>>,
    /// Set when the covariance was too ill-conditioned for optimal weights.
    pub uniform_fallback: bool,
}

/// Type-7 empirical quantile of an already sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 || q <= 0.0 {
        return sorted[0];
    }
    if q >= 1.0 {
        return sorted[n - 1];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySeries("empirical quantile of an empty sample".into()));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("sample contains non-finite values"));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Order-statistic quantile with linear interpolation at `h = (n-1) q + 1`.
pub fn empirical_quantile(sample: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level must lie in [0,1], got {q}")));
    }
    Ok(quantile_sorted(&sorted_copy(sample)?, q))
}

/// Derivative of `log(expm1(x) / x)`.
fn dlog_exprel(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 + x / 12.0
    } else if x > 0.0 {
        1.0 / -(-x).exp_m1() - 1.0 / x
    } else {
        x.exp() / x.exp_m1() - 1.0 / x
    }
}

/// The spacing-ratio curve of a triple.
pub fn spacing_ratio(xi: f64, ll: &[f64; 3]) -> f64 {
    let d21 = ll[1] - ll[0];
    let d32 = ll[2] - ll[1];
    (-xi * d21).exp() * (d32 / d21) * exprel(-xi * d32) / exprel(-xi * d21)
}

fn spacing_ratio_derivative(xi: f64, ll: &[f64; 3]) -> f64 {
    let d21 = ll[1] - ll[0];
    let d32 = ll[2] - ll[1];
    spacing_ratio(xi, ll) * (-d21 - d32 * dlog_exprel(-xi * d32) + d21 * dlog_exprel(-xi * d21))
}

/// Solve `R(xi) = target` on the bracket: bisection down to a narrow interval,
/// then safeguarded secant steps.
fn invert_ratio(target: f64, ll: &[f64; 3]) -> Result<f64> {
    let f = |x: f64| spacing_ratio(x, ll) - target;
    let (mut lo, mut hi) = XI_BRACKET;
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence(format!(
            "spacing ratio {target} has no shape solution in [{lo}, {hi}]"
        )));
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (f(x0), f(x1));
    for _ in 0..100 {
        if (x1 - x0).abs() < ROOT_TOL || f1 == 0.0 {
            return Ok(x1);
        }
        let mut x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > lo && x2 < hi) || !x2.is_finite() {
            x2 = 0.5 * (lo + hi);
        }
        let f2 = f(x2);
        if f2.signum() == flo.signum() {
            lo = x2;
            flo = f2;
        } else {
            hi = x2;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        if hi - lo < ROOT_TOL {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NoConvergence(format!("secant refinement stalled for ratio {target}")))
}

fn check_spacings(q: &[f64; 3]) -> Result<()> {
    if !(q[1] > q[0]) || !(q[2] > q[1]) {
        return Err(Error::degenerate(format!(
            "empirical quantiles are not strictly increasing: {q:?}"
        )));
    }
    Ok(())
}

/// Shape estimate from three quantiles (exact or empirical).
pub fn xi_from_quantiles(quantiles: [f64; 3], t: &QuantileTriple) -> Result<f64> {
    check_spacings(&quantiles)?;
    let r = (quantiles[2] - quantiles[1]) / (quantiles[1] - quantiles[0]);
    invert_ratio(r, &t.loglogs())
}

/// Scale and location given the shape and three quantiles.
pub fn sigma_mu_from_quantiles(quantiles: [f64; 3], xi: f64, t: &QuantileTriple) -> Result<(f64, f64)> {
    let ll = t.loglogs();
    let d21 = ll[1] - ll[0];
    // (e^{-xi L2} - e^{-xi L1}) / xi, written without cancellation
    let spread = -d21 * (-xi * ll[0]).exp() * exprel(-xi * d21);
    let sigma = (quantiles[1] - quantiles[0]) / spread;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::degenerate(format!("non-positive scale estimate {sigma}")));
    }
    // (e^{-xi L2} - 1) / xi
    let offset = -ll[1] * exprel(-xi * ll[1]);
    let mu = quantiles[1] - sigma * offset;
    Ok((sigma, mu))
}

fn empirical_triple(sorted: &[f64], t: &QuantileTriple) -> [f64; 3] {
    t.levels.map(|q| quantile_sorted(sorted, q))
}

fn require_sample(n: usize) -> Result<()> {
    if n < MIN_SAMPLE {
        return Err(Error::InsufficientData { what: "GEV fit sample", needed: MIN_SAMPLE, available: n });
    }
    Ok(())
}

/// Three-quantile shape estimator.
pub fn three_quantile_xi(sample: &[f64], t: &QuantileTriple) -> Result<f64> {
    require_sample(sample.len())?;
    let sorted = sorted_copy(sample)?;
    xi_from_quantiles(empirical_triple(&sorted, t), t)
}

/// Returns `(sigma, mu)`.
pub fn fit_sigma_mu(sample: &[f64], xi: f64, t: &QuantileTriple) -> Result<(f64, f64)> {
    let sorted = sorted_copy(sample)?;
    sigma_mu_from_quantiles(empirical_triple(&sorted, t), xi, t)
}

/// Asymptotic covariance (before the `1/n` factor) of the per-triple shape
/// estimators when the data are GEV with shape `xi`.
pub fn xi_covariance(xi: f64, triples: &[QuantileTriple]) -> DMatrix<f64> {
    // location and scale cancel in the ratio; work with the standard model
    let std_model = GevParams::new(xi, 0.0, 1.0).expect("finite shape");
    let mut levels: Vec<f64> = triples.iter().flat_map(|t| t.levels).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let index = |q: f64| levels.iter().position(|&l| l == q).expect("level present");

    let m = levels.len();
    let density: Vec<f64> = levels.iter().map(|&q| std_model.pdf(std_model.quantile_unchecked(q))).collect();
    let quant_cov = DMatrix::from_fn(m, m, |a, b| {
        let (qa, qb) = (levels[a], levels[b]);
        (qa.min(qb) - qa * qb) / (density[a] * density[b])
    });

    let mut jac = DMatrix::<f64>::zeros(triples.len(), m);
    for (j, t) in triples.iter().enumerate() {
        let ll = t.loglogs();
        let q = t.levels.map(|l| std_model.quantile_unchecked(l));
        let s21 = q[1] - q[0];
        let r = (q[2] - q[1]) / s21;
        let dr = spacing_ratio_derivative(xi, &ll);
        jac[(j, index(t.levels[0]))] += r / s21 / dr;
        jac[(j, index(t.levels[1]))] += -(1.0 + r) / s21 / dr;
        jac[(j, index(t.levels[2]))] += 1.0 / s21 / dr;
    }
    &jac * quant_cov * jac.transpose()
}

/// Combination weights for a covariance matrix. Returns the weights and
/// whether the uniform fallback was taken.
pub fn combination_weights(cov: &DMatrix<f64>, mode: WeightMode) -> (Vec<f64>, bool) {
    let p = cov.nrows();
    let uniform = vec![1.0 / p as f64; p];
    if mode == WeightMode::Uniform || p == 1 {
        return (uniform, false);
    }
    let eig = cov.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || max / min > MAX_CONDITION || !max.is_finite() {
        log::warn!("shape covariance ill-conditioned (eigenvalues {min:e}..{max:e}); using uniform weights");
        return (uniform, true);
    }
    let ones = DVector::from_element(p, 1.0);
    let Some(chol) = cov.clone().cholesky() else {
        return (uniform, true);
    };
    let x = chol.solve(&ones);
    let total: f64 = x.iter().sum();
    (x.iter().map(|v| v / total).collect(), false)
}

fn quadratic_form(cov: &DMatrix<f64>, w: &[f64]) -> f64 {
    let w = DVector::from_column_slice(w);
    (w.transpose() * cov * &w)[(0, 0)].max(0.0)
}

/// Asymptotic variance of the combined shape estimator at `xi`.
pub fn xi_asymptotic_variance(xi: f64, cfg: &MultiQuantileConfig) -> Result<f64> {
    cfg.validate()?;
    if !xi.is_finite() {
        return Err(Error::domain("shape must be finite"));
    }
    let cov = xi_covariance(xi, &cfg.triples);
    let (w, _) = combination_weights(&cov, cfg.weight_mode);
    Ok(quadratic_form(&cov, &w))
}

/// Weighted multi-quantile fit of all three GEV parameters.
///
/// Each triple gives a shape estimate; a pilot (their plain average) fixes the
/// covariance model once, and the minimum-variance combination is returned.
/// Location and scale are then recovered at the central triple.
pub fn multi_quantile_fit(sample: &[f64], cfg: &MultiQuantileConfig) -> Result<FitResult> {
    cfg.validate()?;
    require_sample(sample.len())?;
    let sorted = sorted_copy(sample)?;

    let mut first_err = None;
    let triple_xis: Vec<Option<f64>> = cfg
        .triples
        .iter()
        .map(|t| match xi_from_quantiles(empirical_triple(&sorted, t), t) {
            Ok(x) => Some(x),
            Err(e) => {
                first_err.get_or_insert(e);
                None
            }
        })
        .collect();
    let used: Vec<(QuantileTriple, f64)> = cfg
        .triples
        .iter()
        .zip(&triple_xis)
        .filter_map(|(t, x)| x.map(|x| (*t, x)))
        .collect();
    if used.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::degenerate("no usable quantile triple")));
    }

    let pilot = used.iter().map(|(_, x)| x).sum::<f64>() / used.len() as f64;
    let triples: Vec<QuantileTriple> = used.iter().map(|(t, _)| *t).collect();
    let cov = xi_covariance(pilot, &triples);
    let (weights, uniform_fallback) = combination_weights(&cov, cfg.weight_mode);
    let xi: f64 = weights.iter().zip(&used).map(|(w, (_, x))| w * x).sum();
    let xi_variance = quadratic_form(&cov, &weights);

    let (sigma, mu) = sigma_mu_from_quantiles(empirical_triple(&sorted, &cfg.central), xi, &cfg.central)?;
    Ok(FitResult {
        params: GevParams::new(xi, mu, sigma)?,
        weights,
        xi_variance,
        sample_size: sample.len(),
        triple_xis,
        uniform_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::gev_sample;
    use crate::stats::{mean, variance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn triple(a: f64, b: f64, c: f64) -> QuantileTriple {
        QuantileTriple::new(a, b, c).unwrap()
    }

    fn exact_quantiles(p: &GevParams, t: &QuantileTriple) -> [f64; 3] {
        t.levels().map(|q| p.quantile(q).unwrap())
    }

    #[test]
    fn triple_validation() {
        assert!(QuantileTriple::new(0.5, 0.25, 0.75).is_err());
        assert!(QuantileTriple::new(0.0, 0.25, 0.75).is_err());
        assert!(QuantileTriple::new(0.25, 0.25, 0.75).is_err());
        assert!(QuantileTriple::new(0.25, 0.5, 1.0).is_err());
        let mut cfg = MultiQuantileConfig::default();
        cfg.validate().unwrap();
        cfg.triples.push(cfg.triples[0]);
        assert!(cfg.validate().is_err());
        assert!(MultiQuantileConfig { triples: vec![], ..Default::default() }.validate().is_err());
    }

    #[test]
    fn empirical_quantile_examples() {
        assert_eq!(empirical_quantile(&[5.0, 1.0, 3.0, 2.0, 4.0], 0.5).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 0.0).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0, 4.0], 1.0).unwrap(), 4.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn empirical_quantile_converges() {
        let p = GevParams::new(0.2, 0.0, 1.0).unwrap();
        let xs = gev_sample(&p, 1_000_000, 4).unwrap();
        let q = p.quantile(0.9).unwrap();
        assert!(((empirical_quantile(&xs, 0.9).unwrap() - q) / q).abs() < 0.01);
    }

    #[test]
    fn ratio_at_zero_matches_gumbel_limit() {
        let t = triple(0.25, 0.5, 0.75);
        let ll = t.loglogs();
        let r0 = (ll[1] - ll[2]) / (ll[0] - ll[1]);
        // 40-digit reference value of (L2-L3)/(L1-L2)
        assert_abs_diff_eq!(r0, 1.268_686_402_814_448_3, epsilon = 1e-14);
        assert_abs_diff_eq!(spacing_ratio(0.0, &ll), r0, epsilon = 1e-14);
        assert_abs_diff_eq!(spacing_ratio(1e-12, &ll), r0, epsilon = 1e-10);
        // exact ratio fed in -> zero shape
        let qs = [0.0, 1.0, 1.0 + r0];
        assert_abs_diff_eq!(xi_from_quantiles(qs, &t).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn ratio_derivative_matches_finite_difference() {
        let ll = triple(0.1, 0.5, 0.9).loglogs();
        for xi in [-2.0, -0.3, 0.0, 1e-6, 0.4, 3.0] {
            let h = 1e-6;
            let fd = (spacing_ratio(xi + h, &ll) - spacing_ratio(xi - h, &ll)) / (2.0 * h);
            let an = spacing_ratio_derivative(xi, &ll);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "xi={xi}: {fd} vs {an}");
            assert!(an > 0.0);
        }
    }

    #[test]
    fn noiseless_inversion() {
        let t = triple(0.25, 0.5, 0.75);
        let p = GevParams::new(0.5, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(xi_from_quantiles(exact_quantiles(&p, &t), &t).unwrap(), 0.5, epsilon = 1e-9);

        let p = GevParams::new(0.0, 3.0, 2.0).unwrap();
        let (s, m) = sigma_mu_from_quantiles(exact_quantiles(&p, &t), 0.0, &t).unwrap();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m, 3.0, epsilon = 1e-9);

        let p = GevParams::new(0.4, -1.0, 0.5).unwrap();
        let (s, m) = sigma_mu_from_quantiles(exact_quantiles(&p, &t), 0.4, &t).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_and_out_of_bracket() {
        let t = triple(0.25, 0.5, 0.75);
        assert!(matches!(xi_from_quantiles([1.0, 1.0, 2.0], &t), Err(Error::Degenerate(_))));
        assert!(matches!(xi_from_quantiles([1.0, 2.0, 1e9], &t), Err(Error::NoConvergence(_))));
        let constant = vec![2.0; 50];
        assert!(matches!(three_quantile_xi(&constant, &t), Err(Error::Degenerate(_))));
        assert!(matches!(
            three_quantile_xi(&[1.0, 2.0, 3.0], &t),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(multi_quantile_fit(&constant, &MultiQuantileConfig::default()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn three_quantile_monte_carlo_negative_shape() {
        let p = GevParams::new(-0.3, 0.0, 1.0).unwrap();
        let t = triple(0.1, 0.5, 0.9);
        let est: Vec<f64> = (0..100)
            .map(|rep| three_quantile_xi(&gev_sample(&p, 100_000, 500 + rep).unwrap(), &t).unwrap())
            .collect();
        assert_abs_diff_eq!(mean(&est), -0.3, epsilon = 0.05);
    }

    #[test]
    fn sigma_mu_monte_carlo() {
        let p = GevParams::new(0.2, 2.0, 0.5).unwrap();
        let t = triple(0.25, 0.5, 0.75);
        let mut sig = vec![];
        let mut mu = vec![];
        for rep in 0..20 {
            let xs = gev_sample(&p, 100_000, 900 + rep).unwrap();
            let xi = three_quantile_xi(&xs, &t).unwrap();
            let (s, m) = fit_sigma_mu(&xs, xi, &t).unwrap();
            sig.push(s);
            mu.push(m);
        }
        assert!((mean(&sig) - 0.5).abs() / 0.5 < 0.05);
        assert!((mean(&mu) - 2.0).abs() < 0.05);
    }

    #[test]
    fn single_triple_fit_degenerates_to_three_quantile() {
        let t = triple(0.25, 0.5, 0.75);
        let xs = gev_sample(&GevParams::new(0.1, 1.0, 2.0).unwrap(), 500, 8).unwrap();
        let fit = multi_quantile_fit(&xs, &MultiQuantileConfig::single(t)).unwrap();
        let xi = three_quantile_xi(&xs, &t).unwrap();
        let (s, m) = fit_sigma_mu(&xs, xi, &t).unwrap();
        assert_eq!(fit.weights, vec![1.0]);
        assert_abs_diff_eq!(fit.params.xi(), xi, epsilon = 1e-15);
        assert_abs_diff_eq!(fit.params.sigma(), s, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.params.mu(), m, epsilon = 1e-12);
    }

    #[test]
    fn equal_estimates_combine_to_same_value() {
        // Exact GEV quantiles at every level: every triple returns the same
        // shape, so any weights reproduce it.
        let p = GevParams::new(0.3, 0.0, 1.0).unwrap();
        let n = 4001;
        let xs: Vec<f64> = (1..=n).map(|i| p.quantile(i as f64 / (n + 1) as f64).unwrap()).collect();
        let fit = multi_quantile_fit(&xs, &MultiQuantileConfig::default()).unwrap();
        let xis: Vec<f64> = fit.triple_xis.iter().map(|x| x.unwrap()).collect();
        for x in &xis {
            assert_abs_diff_eq!(*x, xis[0], epsilon = 2e-3);
        }
        let lo = xis.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let spread = hi - lo;
        assert!(fit.params.xi() >= lo - 3.0 * spread - 1e-12 && fit.params.xi() <= hi + 3.0 * spread + 1e-12);
        assert_abs_diff_eq!(fit.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn covariance_is_positive_definite_and_weights_normalised() {
        let cfg = MultiQuantileConfig::default();
        for i in 0..=40 {
            let xi = -2.0 + 0.1 * i as f64;
            let v = xi_asymptotic_variance(xi, &cfg).unwrap();
            assert!(v > 0.0, "xi={xi}");
            let cov = xi_covariance(xi, &cfg.triples);
            let (w, fallback) = combination_weights(&cov, WeightMode::Optimized);
            assert!(!fallback);
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            // optimal combination never worse than any single triple
            for j in 0..cfg.triples.len() {
                assert!(v <= cov[(j, j)] * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn single_triple_variance_matches_monte_carlo() {
        let t = triple(0.1, 0.5, 0.9);
        let cfg = MultiQuantileConfig::single(t);
        let sigma2 = xi_asymptotic_variance(0.2, &cfg).unwrap();
        let p = GevParams::new(0.2, 0.0, 1.0).unwrap();
        let n = 10_000;
        let est: Vec<f64> = (0..400)
            .map(|rep| three_quantile_xi(&gev_sample(&p, n, 7_000 + rep).unwrap(), &t).unwrap())
            .collect();
        let emp = variance(&est) * n as f64;
        assert!((emp / sigma2 - 1.0).abs() < 0.2, "empirical {emp} vs asymptotic {sigma2}");
    }

    #[test]
    fn optimized_weights_beat_each_single_triple() {
        let p = GevParams::new(0.2, 0.0, 1.0).unwrap();
        let cfg = MultiQuantileConfig::default();
        let reps = 200;
        let mut combined = Vec::with_capacity(reps);
        let mut singles = vec![Vec::with_capacity(reps); cfg.triples.len()];
        for rep in 0..reps {
            let xs = gev_sample(&p, 10_000, 20_000 + rep as u64).unwrap();
            let fit = multi_quantile_fit(&xs, &cfg).unwrap();
            combined.push(fit.params.xi());
            for (j, x) in fit.triple_xis.iter().enumerate() {
                singles[j].push(x.unwrap());
            }
        }
        let vc = variance(&combined);
        for s in &singles {
            assert!(vc <= variance(s), "{vc} > {}", variance(s));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn location_scale_equivariance(seed in 0u64..1000, a in -5.0f64..5.0, b in 0.1f64..10.0, xi in -0.8f64..1.0) {
            let xs = gev_sample(&GevParams::new(xi, 0.0, 1.0).unwrap(), 300, seed).unwrap();
            let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            let cfg = MultiQuantileConfig::default();
            let fx = multi_quantile_fit(&xs, &cfg).unwrap();
            let fy = multi_quantile_fit(&ys, &cfg).unwrap();
            prop_assert!((fx.params.xi() - fy.params.xi()).abs() <= 1e-9);
            prop_assert!((a + b * fx.params.mu() - fy.params.mu()).abs() <= 1e-8 * (1.0 + fy.params.mu().abs()));
            prop_assert!((b * fx.params.sigma() - fy.params.sigma()).abs() <= 1e-8 * fy.params.sigma());
            prop_assert!((fy.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
