//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion and then asserts it. Run with `--nocapture` to see the lines.
//!
//! The Heston criteria share one desk-scale experiment (seed 2024) that is
//! computed on first use.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use chrono::{Duration, FixedOffset, NaiveDate, TimeZone};
use proptest::prelude::{prop, prop_assert, prop_assert_eq};
use proptest::test_runner::{Config as RunnerConfig, TestRunner};

use gevrisk::changepoint::{bocd, detect_jumps, BocdConfig};
use gevrisk::estimators::{multi_quantile_fit, xi_asymptotic_variance, MultiQuantileConfig};
use gevrisk::gev::{gev_sample, normal_cdf, GevParams, XI_BRANCH_TOL};
use gevrisk::heston::{heston_experiment, ExperimentConfig, ExperimentTable, REFERENCE_TABLE};
use gevrisk::maxima::extract_block_maxima;
use gevrisk::returns::{filter_sessions, log_returns, Bar, BarSeries, FilterRules, SessionSpec, SlrPoint, SlrSeries};
use gevrisk::rng::{derive_seed, open01, seeded};
use gevrisk::stats::{f_test_less, ks_one_sample, mean, variance};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};
use gevrisk::var::{backtest, portfolio_weights, PriceTable, RebalancePlan, Strategy, VarTable};
use rand::Rng;
use rand_distr::StandardNormal;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

static EXPERIMENT: LazyLock<ExperimentTable> = LazyLock::new(|| heston_experiment(&ExperimentConfig::desk(2024)).expect("desk experiment runs"));

#[test]
fn criterion_1_estimator_correctness() {
    let cfg = MultiQuantileConfig::default();
    let (n, reps) = (10_000usize, 200u64);
    let mut pass = true;
    let mut detail = Vec::new();
    for xi in [-0.7, -0.3, 0.0, 0.3, 0.7, 1.0] {
        let p = GevParams::new(xi, 0.0, 1.0).unwrap();
        let sd = xi_asymptotic_variance(xi, &cfg).unwrap().sqrt();
        let est: Vec<f64> = (0..reps)
            .map(|r| {
                let s = gev_sample(&p, n, derive_seed(1, &format!("xi={xi}"), r)).unwrap();
                multi_quantile_fit(&s, &cfg).unwrap().params.xi()
            })
            .collect();
        let bias = mean(&est) - xi;
        let z: Vec<f64> = est.iter().map(|e| (n as f64).sqrt() * (e - xi) / sd).collect();
        let ks = ks_one_sample(&z, normal_cdf).unwrap().pvalue;
        let ok = bias.abs() <= 0.03 && ks > 0.01;
        pass &= ok;
        detail.push(format!("xi={xi:+.1} bias={bias:+.4} ks_p={ks:.3}"));
    }
    verdict(1, "estimator bias and asymptotic normality", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_2_quantile_cdf_round_trip() {
    let mut rng = seeded(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let xi = -1.0 + 2.0 * open01(&mut rng);
        let mu = -5.0 + 10.0 * open01(&mut rng);
        let sigma = 0.1 + 4.9 * open01(&mut rng);
        let q = open01(&mut rng);
        let p = GevParams::new(xi, mu, sigma).unwrap();
        worst = worst.max((p.cdf(p.quantile(q).unwrap()) - q).abs());
    }
    // values on either side of the switch to the Gumbel branch
    let mut jump: f64 = 0.0;
    for sign in [1.0, -1.0] {
        let inside = GevParams::new(sign * XI_BRANCH_TOL * (1.0 - 1e-9), 1.0, 2.0).unwrap();
        let outside = GevParams::new(sign * XI_BRANCH_TOL * (1.0 + 1e-9), 1.0, 2.0).unwrap();
        for q in [0.001, 0.1, 0.5, 0.9, 0.999] {
            let y = inside.quantile(q).unwrap();
            jump = jump.max((outside.quantile(q).unwrap() - y).abs());
            jump = jump.max((outside.cdf(y) - inside.cdf(y)).abs());
        }
    }
    let pass = worst <= 1e-10 && jump <= 1e-6;
    verdict(2, "quantile/cdf round trip", pass, &format!("max round-trip error {worst:.2e}, max gap at xi->0 {jump:.2e}"));
    assert!(pass);
}

fn pooled(table: &ExperimentTable) -> Vec<gevrisk::heston::Aggregate> {
    table.aggregate().unwrap().into_iter().filter(|a| a.z.is_none()).collect()
}

#[test]
fn criterion_3_heston_mean_parameters() {
    let mut pass = true;
    let mut detail = Vec::new();
    for a in pooled(&EXPERIMENT) {
        let r = REFERENCE_TABLE.iter().find(|r| (r.0 - a.delta).abs() < 1e-12).expect("reference scale");
        let ok = (a.m_evi - r.1).abs() <= 0.03 && (a.var99 - r.4).abs() <= 0.15;
        pass &= ok;
        detail.push(format!("delta=1/{:.0} mEVI {:+.4} (ref {:+.2}) VaR {:.3} (ref {:.2})", 1.0 / a.delta, a.m_evi, r.1, a.var99, r.4));
    }
    verdict(3, "Heston mEVI and VaR", pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_4_gate_rates() {
    let rows = &EXPERIMENT.rows;
    let fits: usize = rows.iter().map(|r| r.fits).sum();
    let ks_pass: f64 = rows.iter().map(|r| r.ks_pass_rate * r.fits as f64).sum::<f64>() / fits as f64;
    let mpi_max = rows.iter().map(|r| r.mpi_max).fold(0.0, f64::max);
    let stable = rows.iter().filter(|r| r.sti > 0.8).count() as f64 / rows.len() as f64;
    let (ks_ok, mpi_ok, sti_ok) = (ks_pass >= 0.99, mpi_max < 1e-13, stable >= 0.95);
    let pass = ks_ok && mpi_ok && sti_ok;
    verdict(
        4,
        "gate rates on simulation",
        pass,
        &format!(
            "KS p>0.05 in {:.2}% of {fits} fits ({}), max MPI {mpi_max:.2e} ({}), STI>0.8 in {:.1}% of {} trajectories ({})",
            100.0 * ks_pass,
            if ks_ok { "ok" } else { "below 99%" },
            if mpi_ok { "ok" } else { "not below 1e-13" },
            100.0 * stable,
            rows.len(),
            if sti_ok { "ok" } else { "below 95%" }
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_slr_normality() {
    let mut pass = true;
    let mut detail = Vec::new();
    for r in EXPERIMENT.rows.iter().filter(|r| r.rep == 0) {
        pass &= r.slr_ks_pvalue > 0.05;
        detail.push(format!("z={} delta=1/{:.0} p={:.3}", r.z, 1.0 / r.delta, r.slr_ks_pvalue));
    }
    verdict(5, "SLR normality per (z, delta)", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_6_gev_var_less_variable_than_gp_var() {
    let mut pass = true;
    let mut detail = Vec::new();
    for d in EXPERIMENT.deltas() {
        let cmp: Vec<_> = EXPERIMENT.var_comparisons.iter().filter(|c| (c.delta - d).abs() < 1e-12).collect();
        let gev: Vec<f64> = cmp.iter().map(|c| c.gev_var).collect();
        let gp: Vec<f64> = cmp.iter().map(|c| c.gp_var).collect();
        let f = f_test_less(&gev, &gp).unwrap();
        pass &= gev.len() >= 100 && f.pvalue_less < 0.05;
        detail.push(format!(
            "delta=1/{:.0}: {} windows, var GEV {:.4} vs GP {:.4}, p={:.3}",
            1.0 / d,
            gev.len(),
            variance(&gev),
            variance(&gp),
            f.pvalue_less
        ));
    }
    verdict(6, "GEV-VaR variance below GP-VaR", pass, &detail.join("; "));
    assert!(pass);
}

fn day_bars(days: usize, seed: u64) -> BarSeries {
    let cfg = SyntheticConfig { days, halt_day_rate: 0.2, seed, ..Default::default() };
    synthetic_bars("P", &SessionSpec::cn(), &cfg).unwrap()
}

fn slr_on(days: &[NaiveDate], per_day: usize) -> SlrSeries {
    let off = FixedOffset::east_opt(0).unwrap();
    let points = days
        .iter()
        .flat_map(|d| {
            (0..per_day).map(move |b| SlrPoint {
                timestamp: off.from_local_datetime(&d.and_hms_opt(10, b as u32, 0).unwrap()).unwrap(),
                date: *d,
                bin: b,
                slr: (b as f64 + 1.0) * 0.1,
            })
        })
        .collect();
    SlrSeries { symbol: "P".into(), points, bars_per_day: per_day, delta_minutes: 10, decorrelation_minutes: None, periodicity: vec![], warmup: 0, zero_std_skipped: 0 }
}

#[test]
fn criterion_7_pipeline_properties() {
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();
    let runner = || TestRunner::new_with_rng(RunnerConfig { cases: 32, failure_persistence: None, ..RunnerConfig::default() }, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    let rules = FilterRules::default();

    let r = runner().run(&(3usize..12, 0u64..1000), |(days, seed)| {
        let raw = day_bars(days, seed);
        if let Ok((once, _)) = filter_sessions(&raw, &rules) {
            let (twice, report) = filter_sessions(&once, &rules).unwrap();
            prop_assert_eq!(&twice, &once);
            prop_assert!(report.dropped.is_empty());
        }
        Ok(())
    });
    results.push(("filter idempotence", r.map_err(|e| e.to_string())));

    let r = runner().run(&(2usize..8, 0u64..1000), |(days, seed)| {
        // a tenfold price gap at every open: any overnight return would show
        let raw = synthetic_bars("O", &SessionSpec::cn(), &SyntheticConfig { days, seed, ..Default::default() }).unwrap();
        let first = raw.bars[0].timestamp.date_naive();
        let bars: Vec<Bar> = raw
            .bars
            .iter()
            .map(|b| Bar { price: b.price * 10f64.powi((b.timestamp.date_naive() - first).num_days() as i32), ..*b })
            .collect();
        let series = BarSeries::new("O", bars, SessionSpec::cn()).unwrap();
        let returns = log_returns(&series, 10).unwrap();
        prop_assert!(returns.iter().all(|p| p.lr.abs() < 0.5 && p.timestamp.date_naive() == p.date));
        Ok(())
    });
    results.push(("no overnight returns", r.map_err(|e| e.to_string())));

    let r = runner().run(&(prop::collection::vec(prop::bool::weighted(0.8), 4..80), 1usize..5), |(keep, span)| {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let calendar: Vec<NaiveDate> = (0..keep.len()).map(|i| d0 + Duration::days(i as i64)).collect();
        let present: Vec<NaiveDate> = calendar.iter().zip(&keep).filter(|(_, k)| **k).map(|(d, _)| *d).collect();
        if present.is_empty() {
            return Ok(());
        }
        let s = slr_on(&present, 3);
        let m = extract_block_maxima(&s, span, Some(&calendar)).unwrap();
        let usable: Vec<NaiveDate> = calendar.iter().copied().filter(|d| *d >= present[0]).collect();
        let complete = usable.len() / span * span;
        let covered = s.points.iter().filter(|p| usable[..complete].contains(&p.date)).count();
        prop_assert_eq!(m.maxima.iter().map(|b| b.points).sum::<usize>(), covered);
        prop_assert_eq!(m.maxima.len() + m.skipped_blocks, complete / span);
        let ends: Vec<NaiveDate> = usable[..complete].chunks(span).map(|c| c[span - 1]).collect();
        prop_assert!(m.maxima.iter().all(|b| ends.contains(&b.block_end)));
        prop_assert!(m.maxima.windows(2).all(|w| w[0].block_end < w[1].block_end));
        Ok(())
    });
    results.push(("block partition", r.map_err(|e| e.to_string())));

    let r = runner().run(&(prop::collection::vec(0.0f64..20.0, 1..12), -50.0f64..50.0), |(v, c)| {
        let vars: BTreeMap<String, f64> = v.iter().enumerate().map(|(i, x)| (format!("s{i}"), *x)).collect();
        let w = portfolio_weights(&vars).unwrap();
        prop_assert!((w.values().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.values().all(|x| *x >= 0.0));
        let shifted: BTreeMap<String, f64> = vars.iter().map(|(k, x)| (k.clone(), x + c)).collect();
        let ws = portfolio_weights(&shifted).unwrap();
        prop_assert!(w.iter().all(|(k, x)| (x - ws[k]).abs() <= 1e-9));
        Ok(())
    });
    results.push(("weight normalization and shift invariance", r.map_err(|e| e.to_string())));

    let r = runner().run(&(prop::collection::vec(prop::collection::vec(0.5f64..2.0, 60), 1..4), 0u64..100), |(prices, seed)| {
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..60).map(|i| d0 + Duration::days(i)).collect();
        let closes: BTreeMap<String, Vec<Option<f64>>> = prices.iter().enumerate().map(|(i, p)| (format!("s{i}"), p.iter().map(|x| Some(*x)).collect())).collect();
        let mut rng = seeded(seed);
        let vars: VarTable = closes.keys().map(|k| (k.clone(), (0..60).map(|_| Some(3.0 + 2.0 * open01(&mut rng))).collect())).collect();
        let table = PriceTable { dates, closes };
        let plan = RebalancePlan::default();
        for s in [Strategy::Gev, Strategy::Normal, Strategy::Equal] {
            let a = backtest(&table, Some(&vars), s, &plan).unwrap();
            let b = backtest(&table, Some(&vars), s, &plan).unwrap();
            prop_assert!(a == b);
        }
        let single = PriceTable { dates: table.dates.clone(), closes: table.closes.iter().take(1).map(|(k, v)| (k.clone(), v.clone())).collect() };
        let run = backtest(&single, None, Strategy::Equal, &plan).unwrap();
        let p = &prices[0];
        prop_assert!(run.states.iter().zip(p).all(|(st, x)| (st.value - x / p[0]).abs() <= 1e-9));
        Ok(())
    });
    results.push(("backtest determinism", r.map_err(|e| e.to_string())));

    let r = runner().run(&(prop::collection::vec(-6.0f64..6.0, 10..80), prop::collection::vec(1.0f64..5.0, 10..80), 1usize..80), |(values, th, cut)| {
        let d0 = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let days: Vec<NaiveDate> = (0..values.len()).map(|i| d0 + Duration::days(i as i64)).collect();
        let mut s = slr_on(&days, 1);
        for (p, v) in s.points.iter_mut().zip(&values) {
            p.slr = *v;
        }
        let thresholds: Vec<(NaiveDate, f64)> = th.iter().enumerate().map(|(i, v)| (d0 + Duration::days(i as i64), *v)).collect();
        let full = detect_jumps(&s, &thresholds).unwrap();
        let cut = cut.min(values.len());
        let cut_date = s.points[cut - 1].date;
        let mut head = s.clone();
        head.points.truncate(cut);
        let head_th: Vec<_> = thresholds.iter().filter(|(d, _)| *d <= cut_date).copied().collect();
        let part = detect_jumps(&head, &head_th).unwrap();
        let before: Vec<_> = full.jumps.iter().filter(|j| j.timestamp.date_naive() <= cut_date).copied().collect();
        prop_assert_eq!(before, part.jumps);
        prop_assert!(full.jumps.iter().all(|j| j.slr.abs() > j.threshold));
        Ok(())
    });
    results.push(("no look-ahead jumps", r.map_err(|e| e.to_string())));

    let pass = results.iter().all(|(_, r)| r.is_ok());
    let detail: Vec<String> = results.iter().map(|(n, r)| format!("{n} {}", if r.is_ok() { "ok" } else { "failed" })).collect();
    verdict(7, "pipeline properties", pass, &detail.join(", "));
    for (n, r) in &results {
        if let Err(e) = r {
            println!("  {n}: {e}");
        }
    }
    assert!(pass);
}

#[test]
fn criterion_8_bocd_oracle() {
    let cfg = BocdConfig::default();
    let mut hits = 0;
    let mut false_alarms = 0;
    for seed in 0..100u64 {
        let mut rng = seeded(derive_seed(8, "step", seed));
        let step: Vec<f64> = (0..400).map(|i| if i < 200 { 0.0 } else { 1.0 } + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let r = bocd(&step, &cfg).unwrap();
        if r.changepoints.len() == 1 && r.changepoints[0].t.abs_diff(200) <= 5 {
            hits += 1;
        }
        let mut rng = seeded(derive_seed(8, "noise", seed));
        let noise: Vec<f64> = (0..500).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if !bocd(&noise, &cfg).unwrap().changepoints.is_empty() {
            false_alarms += 1;
        }
    }
    let pass = hits >= 95 && false_alarms <= 5;
    verdict(8, "BOCD step detection and false positives", pass, &format!("{hits}/100 steps found within 5, {false_alarms}/100 noise series with a changepoint"));
    assert!(pass);
}
