//! Bayesian online changepoint detection on EVI(t), and large-jump flags on
//! standardized returns using the prevailing GEV-VaR as threshold.

use std::io::Write;

use chrono::{DateTime, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::returns::SlrSeries;
use crate::risk::RiskTrajectory;
use crate::stats::{mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BocdConfig {
    /// Expected run length between changes; the hazard is `1 / lambda`.
    pub hazard_lambda: f64,
    /// Mode collapses from runs shorter than this are ignored.
    pub min_run: usize,
    /// Leading points used for the empirical prior.
    pub prior_points: usize,
    /// A mode collapse is reported once at least this much posterior mass
    /// sits on runs that began after the midpoint of the run it replaced;
    /// it is dropped if the mode returns to that older run first.
    pub min_posterior: f64,
}

impl Default for BocdConfig {
    fn default() -> Self {
        Self { hazard_lambda: 250.0, min_run: 10, prior_points: 20, min_posterior: 0.99 }
    }
}

pub const MIN_BOCD_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    /// Index at which the new regime starts.
    pub t: usize,
    /// Index at which the change was recognised.
    pub detected_at: usize,
    /// Posterior mass, when reported, on runs that began after the midpoint
    /// of the replaced run.
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangepointReport {
    pub series: String,
    pub changepoints: Vec<Changepoint>,
    pub hazard_lambda: f64,
    /// Indices refer to the original series; the detector saw every
    /// `thinning`-th point.
    pub thinning: usize,
}

/// Normal-inverse-gamma posterior of one run.
#[derive(Debug, Clone, Copy)]
struct Nig {
    mu: f64,
    kappa: f64,
    alpha: f64,
    beta: f64,
}

impl Nig {
    fn log_predictive(&self, x: f64) -> f64 {
        // Student-t with 2 alpha degrees of freedom
        let nu = 2.0 * self.alpha;
        let scale2 = self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa);
        let d = (x - self.mu) * (x - self.mu) / (nu * scale2);
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI * scale2).ln() - 0.5 * (nu + 1.0) * d.ln_1p()
    }

    fn update(&self, x: f64) -> Nig {
        let kappa = self.kappa + 1.0;
        Nig {
            mu: (self.kappa * self.mu + x) / kappa,
            kappa,
            alpha: self.alpha + 0.5,
            beta: self.beta + self.kappa * (x - self.mu) * (x - self.mu) / (2.0 * kappa),
        }
    }
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Run-length posterior recursion with a constant hazard and a Gaussian
/// model of unknown mean and variance. A changepoint is reported when the
/// most probable run length falls below half its previous value.
pub fn bocd(series: &[f64], cfg: &BocdConfig) -> Result<ChangepointReport> {
    if series.len() < MIN_BOCD_POINTS {
        return Err(Error::InsufficientData { what: "points for changepoint detection", needed: MIN_BOCD_POINTS, available: series.len() });
    }
    if !(0.0..=1.0).contains(&cfg.min_posterior) {
        return Err(Error::Config(format!("min_posterior must lie in [0,1], got {}", cfg.min_posterior)));
    }
    if !(cfg.hazard_lambda > 1.0) {
        return Err(Error::Config(format!("hazard lambda must exceed 1, got {}", cfg.hazard_lambda)));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("changepoint series contains non-finite values"));
    }
    let head = &series[..cfg.prior_points.clamp(2, series.len())];
    let m0 = mean(head);
    let scale = m0.abs().max(1.0);
    let prior = Nig { mu: m0, kappa: 1.0, alpha: 1.0, beta: variance(head).max(1e-12 * scale * scale) };

    let h = 1.0 / cfg.hazard_lambda;
    let (log_h, log_1mh) = (h.ln(), (-h).ln_1p());
    // log run-length probabilities and run posteriors, index = run length
    let mut logp: Vec<f64> = vec![0.0];
    let mut runs: Vec<Nig> = vec![prior];
    let mut prev_mode = 0usize;
    let mut pending: Option<Candidate> = None;
    let mut changepoints = Vec::new();

    for (t, &x) in series.iter().enumerate() {
        let pred: Vec<f64> = runs.iter().map(|r| r.log_predictive(x)).collect();
        let mut next = Vec::with_capacity(logp.len() + 1);
        let joint: Vec<f64> = logp.iter().zip(&pred).map(|(lp, pp)| lp + pp).collect();
        next.push(log_sum_exp(&joint) + log_h);
        next.extend(joint.iter().map(|j| j + log_1mh));
        let norm = log_sum_exp(&next);
        for v in &mut next {
            *v -= norm;
        }
        let mut next_runs = Vec::with_capacity(runs.len() + 1);
        next_runs.push(prior);
        next_runs.extend(runs.iter().map(|r| r.update(x)));
        logp = next;
        runs = next_runs;

        let mode = logp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let start = t + 1 - mode;
        let after_last = changepoints.last().is_none_or(|c: &Changepoint| start > c.t);
        if prev_mode >= cfg.min_run && (mode as f64) < 0.5 * prev_mode as f64 && after_last {
            // runs starting after `midpoint` are the ones the collapse favours
            pending = Some(Candidate { start, midpoint: t - prev_mode / 2 });
        }
        if let Some(c) = pending {
            if start <= c.midpoint {
                pending = None;
            } else {
                let short = (t - c.midpoint).min(logp.len() - 1);
                let posterior = logp[..=short].iter().map(|v| v.exp()).sum::<f64>().clamp(0.0, 1.0);
                if posterior >= cfg.min_posterior {
                    changepoints.push(Changepoint { t: c.start, detected_at: t, posterior });
                    pending = None;
                }
            }
        }
        prev_mode = mode;
    }
    Ok(ChangepointReport { series: String::new(), changepoints, hazard_lambda: cfg.hazard_lambda, thinning: 1 })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start: usize,
    midpoint: usize,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Every `j`-th point, starting with the first.
pub fn thin(series: &[f64], j: usize) -> Vec<f64> {
    series.iter().step_by(j.max(1)).copied().collect()
}

/// BOCD on a thinned series with indices mapped back to the original.
pub fn bocd_thinned(id: &str, series: &[f64], j: usize, cfg: &BocdConfig) -> Result<ChangepointReport> {
    let j = j.max(1);
    let mut report = bocd(&thin(series, j), cfg)?;
    for c in &mut report.changepoints {
        c.t *= j;
        c.detected_at *= j;
    }
    report.series = id.to_string();
    report.thinning = j;
    Ok(report)
}

/// GEV-VaR thresholds from a trajectory's passing fits, keyed by the last
/// day each window covers.
pub fn var_thresholds(traj: &RiskTrajectory) -> Vec<(NaiveDate, f64)> {
    let mut v: Vec<(NaiveDate, f64)> = traj
        .records
        .iter()
        .filter(|r| r.pass)
        .filter_map(|r| Some((r.time?, r.var99?)))
        .collect();
    v.sort_by_key(|(d, _)| *d);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub timestamp: DateTime<FixedOffset>,
    pub slr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpReport {
    pub symbol: String,
    pub jumps: Vec<Jump>,
    pub checked: usize,
    /// Points before the first completed window.
    pub skipped: usize,
}

/// Flag every return whose |SLR| exceeds the VaR of the latest window that
/// ended on an earlier day.
pub fn detect_jumps(slr: &SlrSeries, thresholds: &[(NaiveDate, f64)]) -> Result<JumpReport> {
    if thresholds.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Data("VaR thresholds are not in time order".into()));
    }
    let mut jumps = Vec::new();
    let mut checked = 0;
    let mut skipped = 0;
    let mut k = 0;
    for p in &slr.points {
        while k < thresholds.len() && thresholds[k].0 < p.date {
            k += 1;
        }
        if k == 0 {
            skipped += 1;
            continue;
        }
        let threshold = thresholds[k - 1].1;
        checked += 1;
        if p.slr.abs() > threshold {
            jumps.push(Jump { timestamp: p.timestamp, slr: p.slr, threshold });
        }
    }
    Ok(JumpReport { symbol: slr.symbol.clone(), jumps, checked, skipped })
}

impl JumpReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "slr", "threshold"])?;
        for j in &self.jumps {
            w.write_record([j.timestamp.to_rfc3339(), crate::num(j.slr), crate::num(j.threshold)])?;
        }
        w.flush()?;
        Ok(())
    }
}
