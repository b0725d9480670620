//! From raw price bars to standardized log-returns.
//!
//! Bars are grouped into trading days on the session calendar. Days failing
//! the quality rules are dropped whole. Prices are sampled on a fixed grid
//! (10 minutes by default) and turned into intraday log-returns, which are
//! standardized by a realized-volatility estimate and an intraday
//! periodicity factor.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::autocorrelation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub timestamp: DateTime<FixedOffset>,
    pub price: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub open: NaiveTime,
    pub close: NaiveTime,
}

fn minute_of_day(t: NaiveTime) -> u32 {
    t.hour() * 60 + t.minute()
}

/// Trading calendar of one market: the intraday sessions, the return
/// sampling interval and the native bar length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub sessions: Vec<Session>,
    pub delta_minutes: u32,
    pub bar_minutes: u32,
}

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid wall-clock time")
}

impl SessionSpec {
    /// Shenzhen: 09:30-11:30 and 13:00-15:00, 23 ten-minute returns a day.
    pub fn cn() -> Self {
        Self {
            sessions: vec![
                Session { open: hm(9, 30), close: hm(11, 30) },
                Session { open: hm(13, 0), close: hm(15, 0) },
            ],
            delta_minutes: 10,
            bar_minutes: 1,
        }
    }

    /// NYSE regular session 09:30-16:00, 38 ten-minute returns a day.
    pub fn us() -> Self {
        Self {
            sessions: vec![Session { open: hm(9, 30), close: hm(16, 0) }],
            delta_minutes: 10,
            bar_minutes: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sessions.is_empty() {
            return Err(Error::Config("session calendar has no sessions".into()));
        }
        if self.delta_minutes == 0 || self.bar_minutes == 0 {
            return Err(Error::Config("sampling and bar intervals must be positive".into()));
        }
        let mut prev_close = None;
        for s in &self.sessions {
            let (o, c) = (minute_of_day(s.open), minute_of_day(s.close));
            if c <= o {
                return Err(Error::Config(format!("session {:?} closes before it opens", s)));
            }
            if (c - o) % self.delta_minutes != 0 {
                return Err(Error::Config(format!(
                    "sampling interval {} does not divide session {}-{}",
                    self.delta_minutes, s.open, s.close
                )));
            }
            if let Some(pc) = prev_close {
                if o < pc {
                    return Err(Error::Config("sessions overlap or are out of order".into()));
                }
            }
            prev_close = Some(c);
        }
        Ok(())
    }

    /// Sampling instants of one day, as minutes after midnight: `open + delta`
    /// through `close` in every session.
    pub fn grid_minutes(&self) -> Vec<u32> {
        self.sessions
            .iter()
            .flat_map(|s| {
                let (o, c) = (minute_of_day(s.open), minute_of_day(s.close));
                ((o + self.delta_minutes)..=c).step_by(self.delta_minutes as usize)
            })
            .collect()
    }

    pub fn returns_per_day(&self) -> usize {
        self.grid_minutes().len().saturating_sub(1)
    }

    fn session_of(&self, minute: u32) -> Option<usize> {
        self.sessions
            .iter()
            .position(|s| minute >= minute_of_day(s.open) && minute <= minute_of_day(s.close))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSeries {
    pub symbol: String,
    pub bars: Vec<Bar>,
    pub session: SessionSpec,
}

impl BarSeries {
    pub fn new(symbol: impl Into<String>, bars: Vec<Bar>, session: SessionSpec) -> Result<Self> {
        session.validate()?;
        for w in bars.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at {}",
                    w[1].timestamp.to_rfc3339()
                )));
            }
        }
        if let Some(b) = bars.iter().find(|b| !(b.price > 0.0 && b.price.is_finite())) {
            return Err(Error::Data(format!("non-positive price at {}", b.timestamp.to_rfc3339())));
        }
        Ok(Self { symbol: symbol.into(), bars, session })
    }

    /// Bars grouped by local trading date, in order.
    pub fn days(&self) -> BTreeMap<NaiveDate, Vec<Bar>> {
        let mut out: BTreeMap<NaiveDate, Vec<Bar>> = BTreeMap::new();
        for b in &self.bars {
            out.entry(b.timestamp.date_naive()).or_default().push(*b);
        }
        out
    }

    /// Closing price of each trading day.
    pub fn daily_closes(&self) -> Vec<(NaiveDate, f64)> {
        self.days()
            .into_iter()
            .filter_map(|(d, bars)| bars.last().map(|b| (d, b.price)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    /// Days with a longer run of missing grid prices are dropped.
    pub max_consecutive_missing: usize,
    /// Days with a longer stretch of unchanged price (minutes) are dropped.
    pub max_flat_minutes: u32,
    /// Days with fewer minutes of price movement are dropped.
    pub min_movement_minutes: u32,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self { max_consecutive_missing: 3, max_flat_minutes: 30, min_movement_minutes: 90 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterRule {
    ConsecutiveMissing,
    FlatMinutes,
    LowActivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedDay {
    pub date: NaiveDate,
    pub rule: FilterRule,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub symbol: String,
    pub total_days: usize,
    pub retained_days: usize,
    pub zero_volume_bars: usize,
    pub off_session_bars: usize,
    pub dropped: Vec<DroppedDay>,
    /// Fraction of calendar days that survived the filters.
    pub active_fraction: f64,
}

/// Grid prices of one day: `None` where no bar fell in the grid interval.
fn grid_prices(day: &[Bar], session: &SessionSpec, delta_minutes: u32) -> Vec<Option<f64>> {
    let mut spec = session.clone();
    spec.delta_minutes = delta_minutes;
    let grid = spec.grid_minutes();
    let mut out = vec![None; grid.len()];
    let mut k = 0;
    for (slot, &g) in grid.iter().enumerate() {
        let lo = g.saturating_sub(delta_minutes);
        let mut last = None;
        while k < day.len() {
            let m = minute_of_day(day[k].timestamp.time());
            if m > g {
                break;
            }
            if m > lo {
                last = Some(day[k].price);
            }
            k += 1;
        }
        out[slot] = last;
    }
    out
}

fn longest_missing_run(prices: &[Option<f64>]) -> usize {
    let mut best = 0;
    let mut run = 0;
    for p in prices {
        if p.is_none() {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Longest unchanged-price stretch in minutes, within one session.
fn longest_flat_minutes(day: &[Bar], session: &SessionSpec) -> u32 {
    let mut best = 0;
    let mut start = 0;
    for i in 1..=day.len() {
        let breaks = i == day.len()
            || day[i].price != day[i - 1].price
            || session.session_of(minute_of_day(day[i].timestamp.time()))
                != session.session_of(minute_of_day(day[i - 1].timestamp.time()));
        if breaks {
            let span = (day[i - 1].timestamp - day[start].timestamp).num_minutes() as u32 + session.bar_minutes;
            best = best.max(span);
            start = i;
        }
    }
    best
}

fn movement_minutes(day: &[Bar], session: &SessionSpec) -> u32 {
    day.windows(2).filter(|w| w[1].price != w[0].price).count() as u32 * session.bar_minutes
}

/// Drop zero-volume bars, then every day that violates a quality rule.
pub fn filter_sessions(raw: &BarSeries, rules: &FilterRules) -> Result<(BarSeries, ExclusionReport)> {
    if raw.bars.is_empty() {
        return Err(Error::EmptySeries(format!("{}: no bars", raw.symbol)));
    }
    let session = &raw.session;
    let mut zero_volume = 0;
    let mut off_session = 0;
    let mut by_day: BTreeMap<NaiveDate, Vec<Bar>> = BTreeMap::new();
    for b in &raw.bars {
        if b.volume <= 0.0 {
            zero_volume += 1;
            continue;
        }
        if session.session_of(minute_of_day(b.timestamp.time())).is_none() {
            off_session += 1;
            continue;
        }
        by_day.entry(b.timestamp.date_naive()).or_default().push(*b);
    }
    let total_days = raw.days().len();

    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (date, day) in &by_day {
        let prices = grid_prices(day, session, session.delta_minutes);
        let missing = longest_missing_run(&prices);
        let flat = longest_flat_minutes(day, session);
        let moving = movement_minutes(day, session);
        let verdict = if missing > rules.max_consecutive_missing {
            Some((FilterRule::ConsecutiveMissing, format!("{missing} consecutive missing grid prices")))
        } else if flat > rules.max_flat_minutes {
            Some((FilterRule::FlatMinutes, format!("{flat} minutes without price movement")))
        } else if moving < rules.min_movement_minutes {
            Some((FilterRule::LowActivity, format!("{moving} minutes of price movement")))
        } else {
            None
        };
        match verdict {
            Some((rule, detail)) => dropped.push(DroppedDay { date: *date, rule, detail }),
            None => kept.extend_from_slice(day),
        }
    }
    // days that vanished entirely (all zero volume or off-session)
    for date in raw.days().keys() {
        if !by_day.contains_key(date) {
            dropped.push(DroppedDay {
                date: *date,
                rule: FilterRule::LowActivity,
                detail: "no tradable bars".into(),
            });
        }
    }
    dropped.sort_by_key(|d| d.date);

    if kept.is_empty() {
        return Err(Error::EmptySeries(format!("{}: every day was filtered out", raw.symbol)));
    }
    let retained_days = total_days - dropped.len();
    let report = ExclusionReport {
        symbol: raw.symbol.clone(),
        total_days,
        retained_days,
        zero_volume_bars: zero_volume,
        off_session_bars: off_session,
        dropped,
        active_fraction: retained_days as f64 / total_days as f64,
    };
    Ok((BarSeries { symbol: raw.symbol.clone(), bars: kept, session: session.clone() }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnPoint {
    /// End of the return interval.
    pub timestamp: DateTime<FixedOffset>,
    pub date: NaiveDate,
    /// Intraday bin of the interval end, `0..returns_per_day`.
    pub bin: usize,
    pub lr: f64,
}

/// Intraday log-returns on the sampling grid. Consecutive available grid
/// prices of the same day produce one return; overnight returns are never
/// formed. A return may bridge missing grid points inside a day.
pub fn log_returns(b: &BarSeries, delta_minutes: u32) -> Result<Vec<ReturnPoint>> {
    let mut spec = b.session.clone();
    spec.delta_minutes = delta_minutes;
    spec.validate()?;
    let grid = spec.grid_minutes();
    let mut out = Vec::new();
    for (date, day) in b.days() {
        let offset = *day[0].timestamp.offset();
        let prices = grid_prices(&day, &spec, delta_minutes);
        let mut prev: Option<f64> = None;
        for (slot, p) in prices.iter().enumerate() {
            let Some(p) = *p else { continue };
            if let Some(q) = prev {
                let t = NaiveTime::from_num_seconds_from_midnight_opt(grid[slot] * 60, 0).expect("grid time");
                let ts = date.and_time(t).and_local_timezone(offset).single().expect("fixed offset");
                out.push(ReturnPoint { timestamp: ts, date, bin: slot - 1, lr: p.ln() - q.ln() });
            }
            prev = Some(p);
        }
    }
    Ok(out)
}

/// Realized standard deviation of return `i` from the `k` most recent
/// products of adjacent absolute returns:
/// `sqrt(pi / (2k) * sum_{j=1..k} |lr[i-j]| |lr[i-j+1]|)`.
pub fn realized_std(lr: &[f64], i: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("realized-volatility lookback must be positive"));
    }
    if i < k || i >= lr.len() {
        return Err(Error::InsufficientData { what: "realized-volatility history", needed: k + 1, available: i.min(lr.len()) + 1 });
    }
    let s: f64 = (1..=k).map(|j| lr[i - j].abs() * lr[i - j + 1].abs()).sum();
    Ok((std::f64::consts::FRAC_PI_2 / k as f64 * s).sqrt())
}

/// Minimum number of days for the periodicity estimate.
pub const MIN_PERIODICITY_DAYS: usize = 20;
const PERIODICITY_FLOOR: f64 = 0.1;

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust intraday periodicity: per-bin median absolute return over the
/// grand median, rescaled to mean one and floored at 0.1.
///
/// `days[d][b]` is the return of day `d` in bin `b` (`None` if absent).
pub fn periodicity_factor(days: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    if days.len() < MIN_PERIODICITY_DAYS {
        return Err(Error::InsufficientData {
            what: "days for periodicity estimate",
            needed: MIN_PERIODICITY_DAYS,
            available: days.len(),
        });
    }
    let bins = days.iter().map(Vec::len).max().unwrap_or(0);
    if bins == 0 {
        return Err(Error::EmptySeries("periodicity input has no bins".into()));
    }
    let mut all: Vec<f64> = days.iter().flatten().flatten().map(|x| x.abs()).collect();
    if all.is_empty() {
        return Ok(vec![1.0; bins]);
    }
    let grand = median(&mut all);
    if grand <= 0.0 {
        return Ok(vec![1.0; bins]);
    }
    let raw: Vec<f64> = (0..bins)
        .map(|b| {
            let mut col: Vec<f64> = days.iter().filter_map(|d| d.get(b).copied().flatten()).map(f64::abs).collect();
            if col.is_empty() {
                1.0
            } else {
                median(&mut col) / grand
            }
        })
        .collect();
    let m = raw.iter().sum::<f64>() / bins as f64;
    Ok(raw.iter().map(|f| if m > 0.0 { (f / m).max(PERIODICITY_FLOOR) } else { 1.0 }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StandardizeOptions {
    /// Realized-volatility lookback in returns.
    pub k: usize,
    pub periodicity: bool,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        Self { k: 500, periodicity: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlrPoint {
    pub timestamp: DateTime<FixedOffset>,
    pub date: NaiveDate,
    pub bin: usize,
    pub slr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlrSeries {
    pub symbol: String,
    pub points: Vec<SlrPoint>,
    pub bars_per_day: usize,
    pub delta_minutes: u32,
    pub decorrelation_minutes: Option<f64>,
    pub periodicity: Vec<f64>,
    /// Returns consumed by the realized-volatility warm-up.
    pub warmup: usize,
    /// Points skipped because the volatility estimate was zero.
    pub zero_std_skipped: usize,
}

impl SlrSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.slr).collect()
    }
}

/// Standardize intraday log-returns by realized volatility and, optionally,
/// the intraday periodicity factor of each return's bin.
pub fn standardize(
    symbol: &str,
    returns: &[ReturnPoint],
    bars_per_day: usize,
    delta_minutes: u32,
    opts: &StandardizeOptions,
) -> Result<SlrSeries> {
    let k = opts.k;
    if k == 0 {
        return Err(Error::domain("realized-volatility lookback must be positive"));
    }
    if returns.len() <= k {
        return Err(Error::InsufficientData { what: "returns for standardization", needed: k + 1, available: returns.len() });
    }
    let abs: Vec<f64> = returns.iter().map(|r| r.lr.abs()).collect();
    // prefix[m] = sum_{l=1..m} |lr[l-1]| |lr[l]|
    let mut prefix = vec![0.0; abs.len()];
    for m in 1..abs.len() {
        prefix[m] = prefix[m - 1] + abs[m - 1] * abs[m];
    }
    let mut vol_std = Vec::with_capacity(returns.len() - k);
    let mut skipped = 0;
    for i in k..returns.len() {
        let s = prefix[i] - prefix[i - k];
        let sd = (std::f64::consts::FRAC_PI_2 / k as f64 * s.max(0.0)).sqrt();
        if sd > 0.0 {
            vol_std.push((i, returns[i].lr / sd));
        } else {
            skipped += 1;
        }
    }

    let factors = if opts.periodicity {
        let mut days: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
        for &(i, u) in &vol_std {
            let row = days.entry(returns[i].date).or_insert_with(|| vec![None; bars_per_day.max(1)]);
            if let Some(slot) = row.get_mut(returns[i].bin) {
                *slot = Some(u);
            }
        }
        let rows: Vec<Vec<Option<f64>>> = days.into_values().collect();
        periodicity_factor(&rows)?
    } else {
        vec![1.0; bars_per_day.max(1)]
    };

    let points = vol_std
        .iter()
        .map(|&(i, u)| {
            let r = &returns[i];
            let f = factors.get(r.bin).copied().unwrap_or(1.0);
            SlrPoint { timestamp: r.timestamp, date: r.date, bin: r.bin, slr: u / f }
        })
        .collect();
    Ok(SlrSeries {
        symbol: symbol.to_string(),
        points,
        bars_per_day,
        delta_minutes,
        decorrelation_minutes: None,
        periodicity: factors,
        warmup: k,
        zero_std_skipped: skipped,
    })
}

/// Minimum series length for the decorrelation estimate.
pub const MIN_DECORRELATION_POINTS: usize = 500;
const STAY_IN_BAND: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decorrelation {
    pub lag: usize,
    pub minutes: f64,
    /// No lag qualified within the search cap; `lag` is the cap.
    pub capped: bool,
}

/// Smallest lag from which the autocorrelation of `values` stays inside
/// `±1.96/sqrt(n)` for six consecutive lags.
pub fn decorrelation_lag(values: &[f64], max_lag: usize) -> Option<usize> {
    let n = values.len();
    let band = 1.96 / (n as f64).sqrt();
    let acf = autocorrelation(values, max_lag + STAY_IN_BAND);
    (1..=max_lag).find(|&lag| {
        let hi = (lag + STAY_IN_BAND).min(acf.len());
        lag <= acf.len() && acf[lag - 1..hi].iter().all(|r| r.abs() <= band)
    })
}

/// Decorrelation time of `|SLR|`, searched up to ten trading days.
pub fn decorrelation_time(s: &SlrSeries) -> Result<Decorrelation> {
    if s.points.len() < MIN_DECORRELATION_POINTS {
        return Err(Error::InsufficientData {
            what: "points for decorrelation time",
            needed: MIN_DECORRELATION_POINTS,
            available: s.points.len(),
        });
    }
    let abs: Vec<f64> = s.points.iter().map(|p| p.slr.abs()).collect();
    let cap = (10 * s.bars_per_day.max(1)).min(abs.len() / 2);
    let (lag, capped) = match decorrelation_lag(&abs, cap) {
        Some(l) => (l, false),
        None => (cap, true),
    };
    Ok(Decorrelation { lag, minutes: (lag as u32 * s.delta_minutes) as f64, capped })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Deserialize)]
struct BarRow {
    timestamp: String,
    price: String,
    volume: String,
}

/// Read a `timestamp,price,volume` CSV. Malformed rows, and rows that do not
/// advance the clock, are skipped and reported with their line number.
pub fn read_bars_csv<R: Read>(reader: R, symbol: &str, session: &SessionSpec) -> Result<(BarSeries, Vec<SkippedRow>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["timestamp", "price", "volume"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!("{symbol}: expected header timestamp,price,volume, got {:?}", headers)));
    }
    let mut bars: Vec<Bar> = Vec::new();
    let mut skipped = Vec::new();
    for (i, row) in rdr.deserialize::<BarRow>().enumerate() {
        let line = i + 2;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| {
            let ts = DateTime::parse_from_rfc3339(&r.timestamp).map_err(|e| format!("timestamp: {e}"))?;
            let price: f64 = r.price.parse().map_err(|e| format!("price: {e}"))?;
            let volume: f64 = r.volume.parse().map_err(|e| format!("volume: {e}"))?;
            if !(price > 0.0 && price.is_finite()) {
                return Err(format!("non-positive price {price}"));
            }
            if !(volume >= 0.0 && volume.is_finite()) {
                return Err(format!("invalid volume {volume}"));
            }
            Ok(Bar { timestamp: ts, price, volume })
        });
        match parsed {
            Ok(b) if bars.last().is_some_and(|p| b.timestamp <= p.timestamp) => {
                log::warn!("{symbol}: line {line}: timestamp does not advance, row skipped");
                skipped.push(SkippedRow { line, reason: "timestamp does not advance".into() });
            }
            Ok(b) => bars.push(b),
            Err(reason) => {
                log::warn!("{symbol}: line {line}: {reason}, row skipped");
                skipped.push(SkippedRow { line, reason });
            }
        }
    }
    Ok((BarSeries::new(symbol, bars, session.clone())?, skipped))
}

pub fn write_bars_csv<W: Write>(writer: W, bars: &[Bar]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "price", "volume"])?;
    for b in bars {
        w.write_record([b.timestamp.to_rfc3339(), crate::num(b.price), crate::num(b.volume)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slr_csv<W: Write>(writer: W, s: &SlrSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "slr"])?;
    for p in &s.points {
        w.write_record([p.timestamp.to_rfc3339(), crate::num(p.slr)])?;
    }
    w.flush()?;
    Ok(())
}
