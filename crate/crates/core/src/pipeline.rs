//! End-to-end analysis of a directory of per-symbol bar files: filtering,
//! standardization, block maxima, rolling fits and their pool-level uses.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

use crate::changepoint::{bocd_thinned, detect_jumps, var_thresholds, ChangepointReport, JumpReport};
use crate::config::{NormalInput, PipelineConfig};
use crate::error::{Error, Result};
use crate::maxima::{extract_block_maxima, MaximaSeries};
use crate::returns::{
    decorrelation_time, filter_sessions, log_returns, read_bars_csv, standardize, BarSeries, Decorrelation, ExclusionReport, SessionSpec,
    SkippedRow, SlrSeries,
};
use crate::risk::{fit_trajectory, stability, var_on_calendar, RiskTrajectory};
use crate::var::{backtest_strategies, normal_var, BacktestRun, PriceTable, Strategy, VarTable};

#[derive(Debug, Clone, Serialize)]
pub struct SymbolAnalysis {
    pub symbol: String,
    pub skipped_rows: Vec<SkippedRow>,
    pub exclusions: ExclusionReport,
    #[serde(skip)]
    pub slr: SlrSeries,
    pub decorrelation: Option<Decorrelation>,
    #[serde(skip)]
    pub maxima: MaximaSeries,
    #[serde(skip)]
    pub trajectory: RiskTrajectory,
    #[serde(skip)]
    pub daily_closes: Vec<(NaiveDate, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolFailure {
    pub symbol: String,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoolAnalysis {
    pub symbols: Vec<SymbolAnalysis>,
    pub failures: Vec<SymbolFailure>,
}

impl PoolAnalysis {
    pub fn trajectories(&self) -> Vec<RiskTrajectory> {
        self.symbols.iter().map(|s| s.trajectory.clone()).collect()
    }
}

/// `*.csv` files in `dir`, sorted, keyed by file stem.
pub fn discover_symbols(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                found.push((stem.to_string(), path));
            }
        }
    }
    if found.is_empty() {
        return Err(Error::Data(format!("no symbols: no .csv files in {}", dir.display())));
    }
    found.sort();
    Ok(found)
}

pub fn load_symbol(path: &Path, symbol: &str, session: &SessionSpec) -> Result<(BarSeries, Vec<SkippedRow>)> {
    let file = File::open(path)?;
    read_bars_csv(BufReader::new(file), symbol, session)
}

/// Filter, standardize, extract maxima and fit the rolling risk model for
/// one symbol.
pub fn analyze_bars(raw: &BarSeries, skipped_rows: Vec<SkippedRow>, cfg: &PipelineConfig) -> Result<SymbolAnalysis> {
    let session = cfg.session()?;
    let symbol = raw.symbol.clone();
    let calendar: Vec<NaiveDate> = raw.days().into_keys().collect();
    let (clean, exclusions) = filter_sessions(raw, &cfg.filter)?;
    let returns = log_returns(&clean, session.delta_minutes)?;
    let mut slr = standardize(&symbol, &returns, session.returns_per_day(), session.delta_minutes, &cfg.standardize)?;
    let decorrelation = match decorrelation_time(&slr) {
        Ok(d) => {
            slr.decorrelation_minutes = Some(d.minutes);
            Some(d)
        }
        Err(e) => {
            log::info!("{symbol}: decorrelation time not estimated: {e}");
            None
        }
    };
    let maxima = extract_block_maxima(&slr, cfg.monitor.block_span_days, Some(&calendar))?;
    let times: Vec<NaiveDate> = maxima.maxima.iter().map(|b| b.block_end).collect();
    let mc = cfg.monitor_config()?;
    let mut trajectory = fit_trajectory(&symbol, &maxima.values(), Some(&times), &mc, cfg.seed)?;
    if cfg.backtest.normal_input == NormalInput::AbsSlr {
        for r in &mut trajectory.records {
            let start = r.t + 1 - mc.window.k;
            let from = (start > 0).then(|| times[start - 1]);
            let to = times[r.t];
            let window: Vec<f64> = slr
                .points
                .iter()
                .filter(|p| p.date <= to && from.is_none_or(|f| p.date > f))
                .map(|p| p.slr.abs())
                .collect();
            r.normal_var = normal_var(&window, mc.var_level).ok();
        }
    }
    trajectory.stability = match stability(&trajectory, mc.window.k, &mc.estimator) {
        Ok(s) => Some(s),
        Err(e) => {
            log::info!("{symbol}: no stability verdict: {e}");
            None
        }
    };
    Ok(SymbolAnalysis {
        symbol,
        skipped_rows,
        exclusions,
        slr,
        decorrelation,
        maxima,
        trajectory,
        daily_closes: clean.daily_closes(),
    })
}

/// Analyze every symbol file in `dir` in parallel. Symbols that fail are
/// reported and left out; the call fails only if none succeeds.
pub fn analyze_dir(dir: &Path, cfg: &PipelineConfig) -> Result<PoolAnalysis> {
    let files = discover_symbols(dir)?;
    let session = cfg.session()?;
    let results: Vec<(String, Result<SymbolAnalysis>)> = files
        .par_iter()
        .map(|(symbol, path)| {
            let r = load_symbol(path, symbol, &session).and_then(|(raw, skipped)| analyze_bars(&raw, skipped, cfg));
            (symbol.clone(), r)
        })
        .collect();
    let mut symbols = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for (symbol, r) in results {
        match r {
            Ok(a) => symbols.push(a),
            Err(e) => {
                log::warn!("{symbol}: {e}");
                failures.push(SymbolFailure { symbol, kind: e.kind(), message: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    if symbols.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::Data("no symbols analyzed".into())));
    }
    Ok(PoolAnalysis { symbols, failures })
}

/// Backtest the configured strategies on the pool's daily closes, with
/// VaR taken from each symbol's passing fits.
pub fn backtest_pool(pool: &PoolAnalysis, cfg: &PipelineConfig) -> Result<Vec<BacktestRun>> {
    let series: BTreeMap<String, Vec<(NaiveDate, f64)>> = pool.symbols.iter().map(|s| (s.symbol.clone(), s.daily_closes.clone())).collect();
    let prices = PriceTable::from_series(&series);
    let mut vars: BTreeMap<Strategy, VarTable> = BTreeMap::new();
    for strategy in [Strategy::Gev, Strategy::Normal] {
        let table = pool
            .symbols
            .iter()
            .map(|s| (s.symbol.clone(), var_on_calendar(&s.trajectory, &prices.dates, strategy == Strategy::Normal)))
            .collect();
        vars.insert(strategy, table);
    }
    backtest_strategies(&prices, &vars, &cfg.backtest.strategies, &cfg.backtest.plan)
}

pub fn pool_jumps(pool: &PoolAnalysis) -> Result<Vec<JumpReport>> {
    pool.symbols.iter().map(|s| detect_jumps(&s.slr, &var_thresholds(&s.trajectory))).collect()
}

/// Changepoints in each symbol's EVI trajectory over its passing fits.
/// Indices in the report refer to the returned date list.
pub fn pool_changepoints(pool: &PoolAnalysis, cfg: &PipelineConfig) -> Vec<(ChangepointReport, Vec<NaiveDate>)> {
    pool.symbols
        .iter()
        .filter_map(|s| {
            let (dates, evi): (Vec<NaiveDate>, Vec<f64>) =
                s.trajectory.records.iter().filter(|r| r.pass).filter_map(|r| Some((r.time?, r.xi()?))).unzip();
            match bocd_thinned(&s.symbol, &evi, cfg.changepoint.thinning, &cfg.changepoint.bocd) {
                Ok(rep) => Some((rep, dates)),
                Err(e) => {
                    log::warn!("{}: changepoint detection skipped: {e}", s.symbol);
                    None
                }
            }
        })
        .collect()
}
