//! From minute bars to standardized log-returns: session filtering, the
//! 10-minute grid, realized-volatility and intraday-periodicity scaling,
//! and the decorrelation time of |SLR|.

use gevrisk::returns::{decorrelation_time, filter_sessions, log_returns, standardize, FilterRules, SessionSpec, StandardizeOptions};
use gevrisk::stats::{mean, std_dev};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};

fn main() -> gevrisk::Result<()> {
    let session = SessionSpec::us();
    let raw = synthetic_bars("DEMO", &session, &SyntheticConfig { days: 250, halt_day_rate: 0.03, utc_offset_hours: -5, ..Default::default() })?;
    let (clean, report) = filter_sessions(&raw, &FilterRules::default())?;
    println!("{} of {} days kept", report.retained_days, report.total_days);
    for d in &report.dropped {
        println!("  dropped {} ({:?})", d.date, d.rule);
    }

    let returns = log_returns(&clean, session.delta_minutes)?;
    println!("{} ten-minute returns, {} per day", returns.len(), session.returns_per_day());
    let slr = standardize("DEMO", &returns, session.returns_per_day(), session.delta_minutes, &StandardizeOptions::default())?;
    let v = slr.values();
    println!("SLR: n = {}, mean = {:+.4}, sd = {:.4}", v.len(), mean(&v), std_dev(&v));
    let f = &slr.periodicity;
    println!("periodicity: open {:.2}, midday {:.2}, close {:.2}", f[0], f[f.len() / 2], f[f.len() - 1]);
    let d = decorrelation_time(&slr)?;
    println!("decorrelation of |SLR|: lag {} ({} minutes){}", d.lag, d.minutes, if d.capped { ", capped" } else { "" });
    Ok(())
}
