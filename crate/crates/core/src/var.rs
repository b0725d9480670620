//! Value-at-risk estimates and the VaR-weighted portfolio backtest.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{quantile_sorted, MIN_SAMPLE};
use crate::gev::{normal_quantile, GevParams, GpParams};
use crate::stats::{mean, std_dev};

pub const DEFAULT_VAR_LEVEL: f64 = 0.99;

/// GEV-VaR: the `q` quantile of the fitted maxima distribution.
pub fn gev_var(fit: &GevParams, q: f64) -> Result<f64> {
    fit.quantile(q)
}

/// Normal-VaR: `mean + z_q * sd` of the sample.
pub fn normal_var(sample: &[f64], q: f64) -> Result<f64> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::InsufficientData { what: "normal VaR sample", needed: MIN_SAMPLE, available: sample.len() });
    }
    let sd = std_dev(sample);
    if !(sd > 0.0) {
        return Err(Error::degenerate("normal VaR sample has zero variance"));
    }
    Ok(mean(sample) + normal_quantile(q)? * sd)
}

pub const MIN_EXCEEDANCES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpFit {
    pub params: GpParams,
    pub exceedances: usize,
    pub var: f64,
}

/// Probability-weighted-moment fit of a generalized Pareto distribution to
/// excesses. Returns `(xi, beta)`.
pub fn gp_pwm(excesses: &[f64]) -> Result<(f64, f64)> {
    let n = excesses.len();
    if n < 2 {
        return Err(Error::InsufficientData { what: "GP excesses", needed: 2, available: n });
    }
    let mut y = excesses.to_vec();
    y.sort_by(f64::total_cmp);
    let a0 = mean(&y);
    let a1 = y
        .iter()
        .enumerate()
        .map(|(i, v)| v * (n - 1 - i) as f64 / (n - 1) as f64)
        .sum::<f64>()
        / n as f64;
    let d = a0 - 2.0 * a1;
    if !(d > 0.0) {
        return Err(Error::degenerate("probability-weighted moments give no valid GP fit"));
    }
    let k = a0 / d - 2.0;
    let beta = 2.0 * a0 * a1 / d;
    Ok((-k, beta))
}

/// GP-VaR: peaks over the `threshold_quantile` empirical quantile of the
/// window, fit by probability-weighted moments, extrapolated to level `q`.
pub fn gp_var(window: &[f64], q: f64, threshold_quantile: f64) -> Result<GpFit> {
    if !(threshold_quantile > 0.0 && threshold_quantile < 1.0) {
        return Err(Error::domain("threshold quantile must lie in (0,1)"));
    }
    if window.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("GP window contains non-finite values"));
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return Err(Error::EmptySeries("GP window is empty".into()));
    }
    let u = quantile_sorted(&sorted, threshold_quantile);
    let excesses: Vec<f64> = sorted.iter().filter(|&&x| x > u).map(|x| x - u).collect();
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData { what: "GP exceedances", needed: MIN_EXCEEDANCES, available: excesses.len() });
    }
    let (xi, beta) = gp_pwm(&excesses)?;
    let zeta = excesses.len() as f64 / sorted.len() as f64;
    let params = GpParams::new(xi, beta, u, zeta)?;
    Ok(GpFit { params, exceedances: excesses.len(), var: params.tail_quantile(q)? })
}

/// Softmin portfolio weights `exp(-VaR_i) / sum exp(-VaR_j)`.
pub fn portfolio_weights(vars: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if vars.is_empty() {
        return Err(Error::EmptySeries("no VaR values to weight".into()));
    }
    if vars.values().any(|v| !v.is_finite()) {
        return Err(Error::domain("VaR values must be finite"));
    }
    let lo = vars.values().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = vars.values().map(|v| (lo - v).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(vars.keys().cloned().zip(raw.into_iter().map(|r| r / total)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Gev,
    Normal,
    Equal,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Gev => "gev",
            Strategy::Normal => "normal",
            Strategy::Equal => "equal",
        }
    }
}

/// Share of the portfolio held in stocks; the rest is zero-return cash.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "fraction")]
pub enum PositionSchedule {
    #[default]
    Full,
    /// Hold `1/m` of the portfolio in the `m`-th period.
    Reduce,
    Constant(f64),
}

impl PositionSchedule {
    pub fn fraction(self, period: usize) -> f64 {
        match self {
            PositionSchedule::Full => 1.0,
            PositionSchedule::Reduce => 1.0 / (period + 1) as f64,
            PositionSchedule::Constant(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RebalancePlan {
    pub period_days: usize,
    pub schedule: PositionSchedule,
    /// Proportional cost charged on traded exposure at each rebalance.
    pub cost_rate: f64,
}

impl Default for RebalancePlan {
    fn default() -> Self {
        Self { period_days: 22, schedule: PositionSchedule::Full, cost_rate: 0.0 }
    }
}

impl RebalancePlan {
    pub fn validate(&self) -> Result<()> {
        if self.period_days == 0 {
            return Err(Error::Config("rebalance period must be at least one day".into()));
        }
        if let PositionSchedule::Constant(f) = self.schedule {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("position fraction must lie in [0,1], got {f}")));
            }
        }
        if !(self.cost_rate >= 0.0 && self.cost_rate < 1.0) {
            return Err(Error::Config("cost rate must lie in [0,1)".into()));
        }
        Ok(())
    }
}

/// Daily closes of a pool on a shared calendar; `None` where a symbol has
/// no price that day.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub closes: BTreeMap<String, Vec<Option<f64>>>,
}

impl PriceTable {
    /// Align per-symbol `(date, close)` series on the union of their dates.
    pub fn from_series(series: &BTreeMap<String, Vec<(NaiveDate, f64)>>) -> Self {
        let mut dates: Vec<NaiveDate> = series.values().flatten().map(|(d, _)| *d).collect();
        dates.sort();
        dates.dedup();
        let index: BTreeMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let closes = series
            .iter()
            .map(|(sym, s)| {
                let mut col = vec![None; dates.len()];
                for (d, p) in s {
                    col[index[d]] = Some(*p);
                }
                (sym.clone(), col)
            })
            .collect();
        Self { dates, closes }
    }

    fn validate(&self) -> Result<()> {
        if self.dates.is_empty() || self.closes.is_empty() {
            return Err(Error::EmptySeries("price table is empty".into()));
        }
        for (sym, col) in &self.closes {
            if col.len() != self.dates.len() {
                return Err(Error::Data(format!("{sym}: price column not aligned with the calendar")));
            }
            if col.iter().flatten().any(|p| !(*p > 0.0 && p.is_finite())) {
                return Err(Error::Data(format!("{sym}: non-positive price")));
            }
        }
        Ok(())
    }
}

/// Per-symbol VaR aligned with a [`PriceTable`] calendar.
pub type VarTable = BTreeMap<String, Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioState {
    pub date: NaiveDate,
    pub strategy: Strategy,
    pub position_fraction: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSnapshot {
    pub date: NaiveDate,
    pub strategy: Strategy,
    pub position_fraction: f64,
    pub weights: BTreeMap<String, f64>,
    /// Symbols without a price (or VaR) at the rebalance date.
    pub excluded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRun {
    pub strategy: Strategy,
    pub states: Vec<PortfolioState>,
    pub snapshots: Vec<WeightSnapshot>,
}

fn latest(col: &[Option<f64>], upto: usize) -> Option<f64> {
    col[..=upto].iter().rev().find_map(|v| *v)
}

/// Buy-and-hold within each period of `plan.period_days` trading days. The
/// weights held from the close of day `s` are formed from the latest VaR on
/// or before `s`, the last day of the previous period.
pub fn backtest(prices: &PriceTable, vars: Option<&VarTable>, strategy: Strategy, plan: &RebalancePlan) -> Result<BacktestRun> {
    plan.validate()?;
    prices.validate()?;
    if strategy != Strategy::Equal && vars.is_none() {
        return Err(Error::Config(format!("strategy {} needs a VaR series", strategy.name())));
    }
    let n = prices.dates.len();
    let mut value = 1.0;
    let mut states = vec![PortfolioState { date: prices.dates[0], strategy, position_fraction: 0.0, value }];
    let mut snapshots = Vec::new();
    let mut exposure: BTreeMap<String, f64> = BTreeMap::new();

    let mut start = 0;
    let mut period = 0;
    while start + 1 < n {
        let end = (start + plan.period_days).min(n - 1);
        let mut excluded = Vec::new();
        let mut basis: BTreeMap<String, f64> = BTreeMap::new();
        let mut var_now: BTreeMap<String, f64> = BTreeMap::new();
        for (sym, col) in &prices.closes {
            let Some(p0) = col[start] else {
                excluded.push(sym.clone());
                continue;
            };
            if strategy != Strategy::Equal {
                let v = vars.and_then(|t| t.get(sym)).and_then(|c| if c.len() == n { latest(c, start) } else { None });
                match v {
                    Some(v) => {
                        var_now.insert(sym.clone(), v);
                    }
                    None => {
                        excluded.push(sym.clone());
                        continue;
                    }
                }
            }
            basis.insert(sym.clone(), p0);
        }
        if !excluded.is_empty() {
            log::info!(
                "{} {}: {:?} excluded at rebalance, weight redistributed",
                strategy.name(),
                prices.dates[start],
                excluded
            );
        }
        let weights: BTreeMap<String, f64> = match strategy {
            _ if basis.is_empty() => BTreeMap::new(),
            Strategy::Equal => basis.keys().map(|s| (s.clone(), 1.0 / basis.len() as f64)).collect(),
            Strategy::Gev | Strategy::Normal => portfolio_weights(&var_now)?,
        };
        let fraction = if weights.is_empty() { 0.0 } else { plan.schedule.fraction(period) };

        if plan.cost_rate > 0.0 {
            let mut turnover = 0.0;
            for sym in prices.closes.keys() {
                let new = fraction * weights.get(sym).copied().unwrap_or(0.0);
                turnover += (new - exposure.get(sym).copied().unwrap_or(0.0)).abs();
            }
            value *= 1.0 - plan.cost_rate * turnover;
        }
        snapshots.push(WeightSnapshot {
            date: prices.dates[start],
            strategy,
            position_fraction: fraction,
            weights: weights.clone(),
            excluded,
        });

        let v0 = value;
        let mut last_price = basis.clone();
        for t in start + 1..=end {
            let mut growth = 1.0 - fraction;
            for (sym, w) in &weights {
                if let Some(p) = prices.closes[sym][t] {
                    last_price.insert(sym.clone(), p);
                }
                growth += fraction * w * last_price[sym] / basis[sym];
            }
            value = v0 * growth;
            states.push(PortfolioState { date: prices.dates[t], strategy, position_fraction: fraction, value });
        }
        // drifted exposure at the end of the period, for turnover
        exposure = weights
            .iter()
            .map(|(s, w)| (s.clone(), fraction * w * last_price[s] / basis[s] * v0 / value))
            .collect();
        start = end;
        period += 1;
    }
    Ok(BacktestRun { strategy, states, snapshots })
}

/// Run several strategies on the same inputs concurrently.
pub fn backtest_strategies(
    prices: &PriceTable,
    vars: &BTreeMap<Strategy, VarTable>,
    strategies: &[Strategy],
    plan: &RebalancePlan,
) -> Result<Vec<BacktestRun>> {
    strategies
        .par_iter()
        .map(|s| backtest(prices, vars.get(s), *s, plan))
        .collect()
}

pub fn write_backtest_csv<W: Write>(writer: W, runs: &[BacktestRun]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "strategy", "value"])?;
    for run in runs {
        for s in &run.states {
            w.write_record([s.date.to_string(), run.strategy.name().to_string(), crate::num(s.value)])?;
        }
    }
    w.flush()?;
    Ok(())
}
