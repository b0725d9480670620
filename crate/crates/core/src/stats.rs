//! Test statistics shared by the pipeline: Kolmogorov-Smirnov tests, the
//! variance-ratio F test, Welch's t test and sample moments.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small lambda.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let c = -pi2 / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for j in 1..=20 {
            let k = (2 * j - 1) as f64;
            s += (c * k * k).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            s += if j % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn ks_pvalue(d: f64, effective_n: f64) -> f64 {
    let en = effective_n.sqrt();
    kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("KS test input contains NaN"));
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries("KS test needs two nonempty samples".into()));
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsResult { statistic: d, pvalue: ks_pvalue(d, en) })
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    if xs.is_empty() {
        return Err(Error::EmptySeries("KS test needs a nonempty sample".into()));
    }
    let v = sorted(xs)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult { statistic: d, pvalue: ks_pvalue(d, n) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub ratio: f64,
    /// One-sided p-value for the alternative `var(a) < var(b)`.
    pub pvalue_less: f64,
}

/// Variance-ratio F test of `var(a) / var(b)`.
pub fn f_test_less(a: &[f64], b: &[f64]) -> Result<FTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData { what: "F test sample", needed: 2, available: a.len().min(b.len()) });
    }
    let vb = variance(b);
    if vb <= 0.0 {
        return Err(Error::degenerate("zero variance in F test denominator"));
    }
    let ratio = variance(a) / vb;
    let f = FisherSnedecor::new((a.len() - 1) as f64, (b.len() - 1) as f64)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(FTest { ratio, pvalue_less: f.cdf(ratio) })
}

/// Welch's two-sample t test; returns the two-sided p-value.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData { what: "t test sample", needed: 2, available: a.len().min(b.len()) });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Ok(if mean(a) == mean(b) { 1.0 } else { 0.0 });
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

/// Sample autocorrelation at lags `1..=max_lag` (mean removed, biased
/// normalisation).
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let m = mean(xs);
    let centred: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0: f64 = centred.iter().map(|x| x * x).sum();
    (1..=max_lag.min(n.saturating_sub(1)))
        .map(|lag| {
            if c0 == 0.0 {
                return 0.0;
            }
            centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / c0
        })
        .collect()
}
