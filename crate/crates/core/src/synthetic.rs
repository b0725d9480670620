//! Synthetic minute bars for examples and end-to-end tests: a canonical
//! Heston log-price with an intraday U-shaped volatility pattern, laid on a
//! market's session calendar.

use chrono::{Datelike, Duration, FixedOffset, NaiveDate, NaiveTime, TimeZone, Timelike, Weekday};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heston::{simulate_path, HestonConfig};
use crate::returns::{Bar, BarSeries, SessionSpec};
use crate::rng::{derive_seed, open01, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub days: usize,
    pub start: NaiveDate,
    pub utc_offset_hours: i32,
    pub z: f64,
    /// Per-minute return scale at unit variance.
    pub minute_vol: f64,
    pub start_price: f64,
    /// Share of days given a long trading halt, which the filters drop.
    pub halt_day_rate: f64,
    /// Injected price jumps as `(day, minute, log-return)`.
    pub jumps: Vec<(usize, usize, f64)>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            days: 300,
            start: NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"),
            utc_offset_hours: 8,
            z: 2.0,
            minute_vol: 0.0008,
            start_price: 10.0,
            halt_day_rate: 0.0,
            jumps: Vec::new(),
            seed: 1,
        }
    }
}

/// The next `n` weekdays from `start`.
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn session_minutes(session: &SessionSpec) -> Vec<u32> {
    session
        .sessions
        .iter()
        .flat_map(|s| {
            let o = s.open.hour() * 60 + s.open.minute();
            let c = s.close.hour() * 60 + s.close.minute();
            (o + 1)..=c
        })
        .collect()
}

/// Minute bars for one symbol.
pub fn synthetic_bars(symbol: &str, session: &SessionSpec, cfg: &SyntheticConfig) -> Result<BarSeries> {
    if cfg.days == 0 {
        return Err(Error::Config("synthetic series needs at least one day".into()));
    }
    let offset = FixedOffset::east_opt(cfg.utc_offset_hours * 3600)
        .ok_or_else(|| Error::Config(format!("invalid UTC offset {}", cfg.utc_offset_hours)))?;
    let minutes = session_minutes(session);
    let per_day = minutes.len();
    // one time unit per trading day, one fine step per minute
    let step = 1.0 / per_day as f64;
    let mut h = HestonConfig::new(cfg.z, step, derive_seed(cfg.seed, symbol, 0));
    h.epsilon = step;
    h.horizon = cfg.days as f64;
    let path = simulate_path(&h)?;
    let lr = path.log_returns();

    let mut rng = seeded(derive_seed(cfg.seed, symbol, 1));
    let mut logp = cfg.start_price.ln();
    let mut bars = Vec::with_capacity(cfg.days * per_day);
    for (d, date) in weekdays(cfg.start, cfg.days).into_iter().enumerate() {
        let halt = open01(&mut rng) < cfg.halt_day_rate;
        let halt_start = rng.random_range(0..per_day / 2);
        for (i, &m) in minutes.iter().enumerate() {
            // U-shape: busier near the open and the close
            let x = i as f64 / (per_day - 1).max(1) as f64;
            let shape = 0.7 + 1.2 * (2.0 * x - 1.0).powi(2);
            let mut r = cfg.minute_vol * shape * lr[d * per_day + i] / step.sqrt();
            if let Some(&(_, _, j)) = cfg.jumps.iter().find(|(jd, jm, _)| *jd == d && *jm == i) {
                r += j;
            }
            logp += r;
            if halt && (halt_start..halt_start + 60).contains(&i) {
                continue;
            }
            let t = NaiveTime::from_hms_opt(m / 60, m % 60, 0).expect("minute of day");
            let ts = offset
                .from_local_datetime(&date.and_time(t))
                .single()
                .ok_or_else(|| Error::Data("ambiguous local time".into()))?;
            let volume = (100.0 + 900.0 * open01(&mut rng)).round();
            bars.push(Bar { timestamp: ts, price: logp.exp(), volume });
        }
    }
    BarSeries::new(symbol, bars, session.clone())
}
