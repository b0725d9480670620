//! GEV-VaR, Normal-VaR and GP-VaR on the same data, softmin portfolio
//! weights, and a buy-and-hold backtest rebalanced every 22 days.

use std::collections::BTreeMap;

use gevrisk::config::PipelineConfig;
use gevrisk::gev::{gev_sample, GevParams};
use gevrisk::pipeline::{analyze_bars, backtest_pool, PoolAnalysis};
use gevrisk::returns::SessionSpec;
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};
use gevrisk::var::{gev_var, gp_var, normal_var, portfolio_weights, PositionSchedule};

fn main() -> gevrisk::Result<()> {
    let p = GevParams::new(0.1, 3.0, 0.5)?;
    let window = gev_sample(&p, 123, 5)?;
    println!("GEV-VaR {:.3}, Normal-VaR {:.3}", gev_var(&p, 0.99)?, normal_var(&window, 0.99)?);
    let raw = gev_sample(&p, 5_000, 6)?;
    let gp = gp_var(&raw, 0.99, 0.9)?;
    println!("GP-VaR {:.3} from {} exceedances (xi {:+.3})", gp.var, gp.exceedances, gp.params.xi());

    let vars: BTreeMap<String, f64> = [("A".into(), 4.0), ("B".into(), 5.0), ("C".into(), 7.0)].into();
    println!("weights {:?}", portfolio_weights(&vars)?);

    let mut cfg = PipelineConfig::default();
    cfg.backtest.plan.schedule = PositionSchedule::Constant(0.8);
    let symbols = (0..3)
        .map(|i| {
            let sc = SyntheticConfig { days: 600, z: [0.8, 2.0, 4.0][i], seed: 3, ..Default::default() };
            let raw = synthetic_bars(&format!("P{i}"), &SessionSpec::cn(), &sc)?;
            analyze_bars(&raw, vec![], &cfg)
        })
        .collect::<gevrisk::Result<Vec<_>>>()?;
    let pool = PoolAnalysis { symbols, failures: vec![] };
    for run in backtest_pool(&pool, &cfg)? {
        let last = run.states.last().expect("nonempty backtest");
        println!("{:>6}: final value {:.4} on {}", run.strategy.name(), last.value, last.date);
    }
    Ok(())
}
