//! Rolling GEV risk monitoring: per-window fits, goodness-of-fit gates,
//! extreme-value-index trajectories, their stability, and pool
//! cross-sections.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{multi_quantile_fit, quantile_sorted, xi_asymptotic_variance, MultiQuantileConfig};
use crate::gev::GevParams;
use crate::maxima::{rolling_samples, RollingWindow};
use crate::rng::{derive_seed, seeded};
use crate::stats::{ks_one_sample, ks_two_sample};
use crate::var::{gev_var, normal_var, DEFAULT_VAR_LEVEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KsMode {
    /// Observed maxima against a reference sample drawn from the fit.
    #[default]
    TwoSample,
    /// Observed maxima against the fitted distribution function.
    OneSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub ks_mode: KsMode,
    /// Fits with a KS p-value at or below this level fail.
    pub ks_level: f64,
    /// Fits putting at least this much mass below zero fail.
    pub mpi_max: f64,
    /// Reference sample size as a multiple of the window.
    pub reference_factor: usize,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { ks_mode: KsMode::TwoSample, ks_level: 0.05, mpi_max: 1e-4, reference_factor: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofOutcome {
    pub ks_pvalue: f64,
    /// Model positivity index: fitted probability of a negative maximum.
    pub mpi: f64,
    pub pass: bool,
}

/// Goodness-of-fit and positivity gates for one fitted window.
pub fn gof_gate(sample: &[f64], params: &GevParams, seed: u64, gate: &GateConfig) -> Result<GofOutcome> {
    let ks = match gate.ks_mode {
        KsMode::TwoSample => {
            let mut rng = seeded(seed);
            let reference = params.sample_with(gate.reference_factor.max(1) * sample.len(), &mut rng);
            ks_two_sample(sample, &reference)?
        }
        KsMode::OneSample => ks_one_sample(sample, |y| params.cdf(y))?,
    };
    let mpi = params.cdf(0.0);
    Ok(GofOutcome { ks_pvalue: ks.pvalue, mpi, pass: ks.pvalue > gate.ks_level && mpi < gate.mpi_max })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRecord {
    /// Index of the last block in the window.
    pub t: usize,
    pub time: Option<NaiveDate>,
    pub params: Option<GevParams>,
    pub ks_pvalue: Option<f64>,
    pub mpi: Option<f64>,
    pub var99: Option<f64>,
    /// Normal-VaR of the same maxima window.
    pub normal_var: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

impl RiskRecord {
    pub fn xi(&self) -> Option<f64> {
        self.params.map(|p| p.xi())
    }

    fn label(&self) -> String {
        self.time.map_or_else(|| self.t.to_string(), |d| d.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub m_evi: f64,
    pub sti: f64,
    pub margin: f64,
    pub stable: bool,
    pub passing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskTrajectory {
    pub symbol: String,
    pub records: Vec<RiskRecord>,
    pub stability: Option<Stability>,
}

/// Settings of the rolling fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub window: RollingWindow,
    pub estimator: MultiQuantileConfig,
    pub gate: GateConfig,
    pub var_level: f64,
}

impl MonitorConfig {
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self {
            window: RollingWindow::new(k, 1)?,
            estimator: MultiQuantileConfig::default(),
            gate: GateConfig::default(),
            var_level: DEFAULT_VAR_LEVEL,
        })
    }

    pub fn validate(&self) -> Result<()> {
        RollingWindow::new(self.window.k, self.window.step_blocks)?;
        self.estimator.validate()?;
        if !(self.var_level > 0.5 && self.var_level < 1.0) {
            return Err(Error::Config(format!("VaR level must lie in (0.5,1), got {}", self.var_level)));
        }
        let g = &self.gate;
        if !(g.ks_level > 0.0 && g.ks_level < 1.0) || !(g.mpi_max > 0.0 && g.mpi_max <= 1.0) || g.reference_factor == 0 {
            return Err(Error::Config("gate thresholds out of range".into()));
        }
        Ok(())
    }
}

/// One fit per rolling window of `maxima`. Estimator failures are recorded
/// on the record and the trajectory continues.
///
/// `times[i]` labels block `i`. Reference-sample seeds are derived from
/// `seed`, the symbol and the block index.
pub fn fit_trajectory(symbol: &str, maxima: &[f64], times: Option<&[NaiveDate]>, mc: &MonitorConfig, seed: u64) -> Result<RiskTrajectory> {
    mc.validate()?;
    let (window, cfg, gate) = (mc.window, &mc.estimator, &mc.gate);
    if let Some(t) = times {
        if t.len() != maxima.len() {
            return Err(Error::Data(format!("{symbol}: {} block times for {} maxima", t.len(), maxima.len())));
        }
    }
    let samples = rolling_samples(maxima, window);
    if samples.is_empty() {
        return Err(Error::InsufficientData { what: "block maxima for one window", needed: window.k, available: maxima.len() });
    }
    let records = samples
        .iter()
        .map(|s| {
            let mut rec = RiskRecord {
                t: s.end,
                time: times.map(|t| t[s.end]),
                params: None,
                ks_pvalue: None,
                mpi: None,
                var99: None,
                normal_var: normal_var(s.maxima, mc.var_level).ok(),
                pass: false,
                error: None,
            };
            let fitted = multi_quantile_fit(s.maxima, cfg).and_then(|fit| {
                let var99 = gev_var(&fit.params, mc.var_level)?;
                let g = gof_gate(s.maxima, &fit.params, derive_seed(seed, symbol, s.end as u64), gate)?;
                Ok((fit.params, var99, g))
            });
            match fitted {
                Ok((params, var99, g)) => {
                    rec.params = Some(params);
                    rec.var99 = Some(var99);
                    rec.ks_pvalue = Some(g.ks_pvalue);
                    rec.mpi = Some(g.mpi);
                    rec.pass = g.pass;
                }
                Err(e) => {
                    log::debug!("{symbol} t={}: {e}", s.end);
                    rec.error = Some(e.to_string());
                }
            }
            rec
        })
        .collect();
    Ok(RiskTrajectory { symbol: symbol.to_string(), records, stability: None })
}

/// Minimum passing records for a stability verdict.
pub const MIN_PASSING: usize = 30;
pub const STABLE_STI: f64 = 0.8;

/// Stability of a trajectory from its passing records: the mean index
/// (mEVI), the error margin `1.96 sqrt(var(mEVI) / k)` of a single window
/// estimate, and the share of records within that margin (STI).
pub fn stability(traj: &RiskTrajectory, k: usize, cfg: &MultiQuantileConfig) -> Result<Stability> {
    let xis: Vec<f64> = traj.records.iter().filter(|r| r.pass).filter_map(RiskRecord::xi).collect();
    stability_of(&xis, k, cfg)
}

/// [`stability`] over a plain list of passing shape estimates.
pub fn stability_of(xis: &[f64], k: usize, cfg: &MultiQuantileConfig) -> Result<Stability> {
    if xis.len() < MIN_PASSING {
        return Err(Error::InsufficientData { what: "passing fits for stability", needed: MIN_PASSING, available: xis.len() });
    }
    if k == 0 {
        return Err(Error::domain("window size must be positive"));
    }
    let m_evi = xis.iter().sum::<f64>() / xis.len() as f64;
    let margin = 1.96 * (xi_asymptotic_variance(m_evi, cfg)? / k as f64).sqrt();
    let inside = xis.iter().filter(|x| (*x - m_evi).abs() <= margin).count();
    let sti = inside as f64 / xis.len() as f64;
    Ok(Stability { m_evi, sti, margin, stable: sti > STABLE_STI, passing: xis.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl Band {
    fn of(values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            low: quantile_sorted(values, 0.05),
            mid: quantile_sorted(values, 0.5),
            high: quantile_sorted(values, 0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    pub time: NaiveDate,
    pub symbols: usize,
    pub evi: Band,
    pub var: Band,
}

/// 5%, 50% and 95% quantiles of EVI(t) and VaR(t) across the pool's passing
/// fits at `time`. `None` when fewer than two symbols have one.
pub fn cross_section(pool: &[RiskTrajectory], time: NaiveDate) -> Option<CrossSection> {
    let mut evi = Vec::new();
    let mut var = Vec::new();
    for traj in pool {
        if let Some(r) = traj.records.iter().find(|r| r.time == Some(time) && r.pass) {
            if let (Some(x), Some(v)) = (r.xi(), r.var99) {
                evi.push(x);
                var.push(v);
            }
        }
    }
    if evi.len() < 2 {
        return None;
    }
    Some(CrossSection { time, symbols: evi.len(), evi: Band::of(&mut evi), var: Band::of(&mut var) })
}

/// Cross-sections at every record time present in the pool.
pub fn cross_section_series(pool: &[RiskTrajectory]) -> Vec<CrossSection> {
    let mut times: Vec<NaiveDate> = pool.iter().flat_map(|t| t.records.iter().filter_map(|r| r.time)).collect();
    times.sort();
    times.dedup();
    times.into_iter().filter_map(|t| cross_section(pool, t)).collect()
}

pub fn write_trajectory_csv<W: Write>(writer: W, traj: &RiskTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "xi", "mu", "sigma", "ks_pvalue", "mpi", "var99", "pass"])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, crate::num);
    for r in &traj.records {
        w.write_record([
            r.label(),
            opt(r.params.map(|p| p.xi())),
            opt(r.params.map(|p| p.mu())),
            opt(r.params.map(|p| p.sigma())),
            opt(r.ks_pvalue),
            opt(r.mpi),
            opt(r.var99),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolSummary {
    pub symbol: String,
    pub m_evi: Option<f64>,
    pub sti: Option<f64>,
    pub stable: Option<bool>,
    pub margin: Option<f64>,
    pub records: usize,
    pub passing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoolSummary {
    pub symbols: Vec<SymbolSummary>,
    pub cross_section: Vec<CrossSection>,
}

pub fn pool_summary(pool: &[RiskTrajectory]) -> PoolSummary {
    let symbols = pool
        .iter()
        .map(|t| SymbolSummary {
            symbol: t.symbol.clone(),
            m_evi: t.stability.map(|s| s.m_evi),
            sti: t.stability.map(|s| s.sti),
            stable: t.stability.map(|s| s.stable),
            margin: t.stability.map(|s| s.margin),
            records: t.records.len(),
            passing: t.records.iter().filter(|r| r.pass).count(),
        })
        .collect();
    PoolSummary { symbols, cross_section: cross_section_series(pool) }
}

/// Latest passing-fit VaR per symbol on or before each date of `calendar`.
pub fn var_on_calendar(traj: &RiskTrajectory, calendar: &[NaiveDate], use_normal: bool) -> Vec<Option<f64>> {
    let mut by_time: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for r in traj.records.iter().filter(|r| r.pass) {
        let v = if use_normal { r.normal_var } else { r.var99 };
        if let (Some(t), Some(v)) = (r.time, v) {
            by_time.insert(t, v);
        }
    }
    calendar
        .iter()
        .map(|d| by_time.range(..=*d).next_back().map(|(_, v)| *v))
        .collect()
}
