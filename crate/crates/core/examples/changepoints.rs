//! Bayesian online changepoint detection on an EVI trajectory with a regime
//! shift, and jump flags on standardized returns.

use gevrisk::changepoint::{bocd_thinned, BocdConfig};
use gevrisk::config::PipelineConfig;
use gevrisk::pipeline::{analyze_bars, pool_jumps, PoolAnalysis};
use gevrisk::returns::SessionSpec;
use gevrisk::rng::{open01, seeded};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};

fn main() -> gevrisk::Result<()> {
    // EVI(t) wandering around 0.05 that moves to 0.25 at t = 700
    let mut rng = seeded(9);
    let evi: Vec<f64> = (0..1200).map(|t| if t < 700 { 0.05 } else { 0.25 } + 0.04 * (open01(&mut rng) - 0.5)).collect();
    let report = bocd_thinned("evi", &evi, 10, &BocdConfig::default())?;
    for c in &report.changepoints {
        println!("change at t = {} (seen at {}), posterior {:.3}", c.t, c.detected_at, c.posterior);
    }

    let cfg = PipelineConfig::default();
    let sc = SyntheticConfig { days: 500, jumps: vec![(420, 100, 0.03), (470, 10, -0.04)], ..Default::default() };
    let raw = synthetic_bars("J", &SessionSpec::cn(), &sc)?;
    let pool = PoolAnalysis { symbols: vec![analyze_bars(&raw, vec![], &cfg)?], failures: vec![] };
    for r in pool_jumps(&pool)? {
        println!("{}: {} of {} returns above the prevailing VaR", r.symbol, r.jumps.len(), r.checked);
        for j in &r.jumps {
            println!("  {}  SLR {:+.2} > {:.2}", j.timestamp, j.slr, j.threshold);
        }
    }
    Ok(())
}
