//! Two-day block maxima of |SLR| laid on the trading calendar, and the
//! rolling windows the risk model is fitted on.

use gevrisk::maxima::{extract_block_maxima, rolling_samples, RollingWindow};
use gevrisk::returns::{filter_sessions, log_returns, standardize, FilterRules, SessionSpec, StandardizeOptions};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};

fn main() -> gevrisk::Result<()> {
    let session = SessionSpec::cn();
    let raw = synthetic_bars("BM", &session, &SyntheticConfig { days: 400, halt_day_rate: 0.02, ..Default::default() })?;
    let calendar: Vec<_> = raw.days().into_keys().collect();
    let (clean, _) = filter_sessions(&raw, &FilterRules::default())?;
    let returns = log_returns(&clean, session.delta_minutes)?;
    let slr = standardize("BM", &returns, session.returns_per_day(), session.delta_minutes, &StandardizeOptions::default())?;

    let maxima = extract_block_maxima(&slr, 2, Some(&calendar))?;
    let shrunk = maxima.maxima.iter().filter(|b| b.shrunk).count();
    println!("{} maxima of m = {} returns ({shrunk} blocks shrunk by filtered days, {} skipped)", maxima.maxima.len(), maxima.block_size_m, maxima.skipped_blocks);
    for b in maxima.maxima.iter().take(5) {
        println!("  {}  max |SLR| = {:.3} over {} returns", b.block_end, b.maximum, b.points);
    }

    let values = maxima.values();
    let samples = rolling_samples(&values, RollingWindow::new(123, 10)?);
    println!("{} windows of 123 maxima, every 10 blocks", samples.len());
    if let (Some(first), Some(last)) = (samples.first(), samples.last()) {
        println!("  first ends at block {}, last at block {}", first.end, last.end);
    }
    Ok(())
}
