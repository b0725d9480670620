//! Block maxima of |SLR| and the rolling samples the risk model is fit on.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::MIN_SAMPLE;
use crate::returns::SlrSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockMax {
    pub block_end: NaiveDate,
    pub maximum: f64,
    /// Number of standardized returns the maximum was taken over.
    pub points: usize,
    /// Part of the block's calendar was filtered out.
    pub shrunk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaSeries {
    pub symbol: String,
    pub maxima: Vec<BlockMax>,
    /// Nominal number of returns per block.
    pub block_size_m: usize,
    pub block_span_days: usize,
    /// Calendar blocks without a single valid point.
    pub skipped_blocks: usize,
}

impl MaximaSeries {
    pub fn values(&self) -> Vec<f64> {
        self.maxima.iter().map(|b| b.maximum).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["block_end", "maximum"])?;
        for b in &self.maxima {
            w.write_record([b.block_end.to_string(), crate::num(b.maximum)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maxima of `|values|` over consecutive blocks of `m` points. A trailing
/// partial block is discarded.
pub fn block_maxima(values: &[f64], m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::domain("block size must be at least 1"));
    }
    Ok(values
        .chunks_exact(m)
        .map(|c| c.iter().fold(0.0f64, |acc, x| acc.max(x.abs())))
        .collect())
}

/// Maxima of `|SLR|` over non-overlapping blocks of `block_span_days`
/// trading days.
///
/// `calendar` lists every trading day before filtering. When given, blocks
/// are laid on that calendar, so a filtered day shrinks its block instead of
/// shifting the following ones. Without it the days present in `s` are used.
pub fn extract_block_maxima(s: &SlrSeries, block_span_days: usize, calendar: Option<&[NaiveDate]>) -> Result<MaximaSeries> {
    if block_span_days == 0 {
        return Err(Error::domain("block span must be at least one day"));
    }
    if s.points.is_empty() {
        return Err(Error::EmptySeries(format!("{}: no standardized returns", s.symbol)));
    }
    if let Some(minutes) = s.decorrelation_minutes {
        let day_minutes = (s.bars_per_day as f64) * s.delta_minutes as f64;
        if day_minutes > 0.0 && minutes > block_span_days as f64 * day_minutes {
            log::warn!(
                "{}: decorrelation time {minutes} min exceeds the {block_span_days}-day block",
                s.symbol
            );
        }
    }

    let mut by_day: BTreeMap<NaiveDate, (f64, usize)> = BTreeMap::new();
    for p in &s.points {
        if !p.slr.is_finite() {
            continue;
        }
        let e = by_day.entry(p.date).or_insert((0.0, 0));
        e.0 = e.0.max(p.slr.abs());
        e.1 += 1;
    }
    let days: Vec<NaiveDate> = match calendar {
        Some(c) => {
            let mut c = c.to_vec();
            c.sort();
            c.dedup();
            // the standardized series starts after a warm-up; blocks start with it
            let first = *by_day.keys().next().ok_or_else(|| Error::EmptySeries(s.symbol.clone()))?;
            c.into_iter().filter(|d| *d >= first).collect()
        }
        None => by_day.keys().copied().collect(),
    };

    let mut maxima = Vec::new();
    let mut skipped = 0;
    for block in days.chunks(block_span_days) {
        if block.len() < block_span_days {
            break;
        }
        let mut max = 0.0f64;
        let mut points = 0;
        let mut present = 0;
        for d in block {
            if let Some(&(m, n)) = by_day.get(d) {
                max = max.max(m);
                points += n;
                present += 1;
            }
        }
        if points == 0 {
            skipped += 1;
            continue;
        }
        maxima.push(BlockMax {
            block_end: *block.last().expect("nonempty block"),
            maximum: max,
            points,
            shrunk: present < block.len(),
        });
    }
    Ok(MaximaSeries {
        symbol: s.symbol.clone(),
        maxima,
        block_size_m: s.bars_per_day * block_span_days,
        block_span_days,
        skipped_blocks: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindow {
    /// Maxima per fit sample.
    pub k: usize,
    /// Blocks between consecutive fits.
    pub step_blocks: usize,
}

impl RollingWindow {
    pub fn new(k: usize, step_blocks: usize) -> Result<Self> {
        if k < MIN_SAMPLE {
            return Err(Error::Config(format!("rolling window needs at least {MIN_SAMPLE} maxima, got {k}")));
        }
        if step_blocks == 0 {
            return Err(Error::Config("rolling step must be at least one block".into()));
        }
        Ok(Self { k, step_blocks })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingSample<'a> {
    /// Index of the last block in the window.
    pub end: usize,
    pub maxima: &'a [f64],
}

/// The most recent `k` maxima at every `step_blocks`-th block, starting
/// once a full window is available and aligned so the last block is always
/// a fit time. Empty when the series is shorter than one window.
pub fn rolling_samples(values: &[f64], w: RollingWindow) -> Vec<RollingSample<'_>> {
    if values.len() < w.k {
        return Vec::new();
    }
    let last = values.len() - 1;
    let first = w.k - 1 + (last + 1 - w.k) % w.step_blocks;
    (first..=last)
        .step_by(w.step_blocks)
        .map(|end| RollingSample { end, maxima: &values[end + 1 - w.k..=end] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::returns::SlrPoint;
    use crate::rng::seeded;
    use chrono::{Duration, FixedOffset, TimeZone};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn slr(values: &[f64], per_day: usize) -> SlrSeries {
        let off = FixedOffset::east_opt(0).unwrap();
        let d0 = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let date = d0 + Duration::days((i / per_day) as i64);
                let ts = off.from_local_datetime(&date.and_hms_opt(10, 0, 0).unwrap()).unwrap() + Duration::minutes((i % per_day) as i64);
                SlrPoint { timestamp: ts, date, bin: i % per_day, slr: v }
            })
            .collect();
        SlrSeries {
            symbol: "S".into(),
            points,
            bars_per_day: per_day,
            delta_minutes: 10,
            decorrelation_minutes: None,
            periodicity: vec![],
            warmup: 0,
            zero_std_skipped: 0,
        }
    }

    #[test]
    fn maxima_of_absolute_values() {
        let v = [1.0, -3.0, 2.0, -5.0, 4.0, -6.0];
        assert_eq!(block_maxima(&v, 3).unwrap(), vec![3.0, 6.0]);
        let ms = extract_block_maxima(&slr(&v, 3), 1, None).unwrap();
        assert_eq!(ms.values(), vec![3.0, 6.0]);
        assert_eq!(ms.block_size_m, 3);
        let c = extract_block_maxima(&slr(&[0.7; 12], 3), 2, None).unwrap();
        assert_eq!(c.values(), vec![0.7, 0.7]);
    }

    #[test]
    fn mean_maximum_matches_half_normal_oracle() {
        let mut rng = seeded(31);
        let z: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let ms = extract_block_maxima(&slr(&z, 23), 2, None).unwrap();
        assert_eq!(ms.block_size_m, 46);
        let got = crate::stats::mean(&ms.values());
        // independent oracle: direct simulation of max of 46 |N(0,1)|
        let mut orng = seeded(32);
        let reps = 200_000;
        let oracle = (0..reps)
            .map(|_| (0..46).map(|_| orng.sample::<f64, _>(StandardNormal).abs()).fold(0.0, f64::max))
            .sum::<f64>()
            / reps as f64;
        assert!((got / oracle - 1.0).abs() < 0.03, "{got} vs {oracle}");
    }

    #[test]
    fn filtered_day_shrinks_its_block() {
        let s = slr(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 2);
        let mut cal: Vec<NaiveDate> = s.points.iter().map(|p| p.date).collect();
        cal.dedup();
        // drop the second day's points
        let mut s2 = s.clone();
        s2.points.retain(|p| p.date != cal[1]);
        let ms = extract_block_maxima(&s2, 2, Some(&cal)).unwrap();
        assert_eq!(ms.values(), vec![2.0, 8.0]);
        assert!(ms.maxima[0].shrunk && !ms.maxima[1].shrunk);
        assert_eq!(ms.maxima[0].points, 2);
        // without the calendar the blocks would shift
        assert_eq!(extract_block_maxima(&s2, 2, None).unwrap().values(), vec![6.0]);

        // a block with no surviving day is skipped and counted
        let mut s3 = s.clone();
        s3.points.retain(|p| p.date != cal[2] && p.date != cal[3]);
        let ms = extract_block_maxima(&s3, 2, Some(&cal)).unwrap();
        assert_eq!(ms.maxima.len(), 1);
        assert_eq!(ms.skipped_blocks, 1);
    }

    #[test]
    fn rolling_examples() {
        let v: Vec<f64> = (0..123).map(f64::from).collect();
        let w = RollingWindow::new(123, 1).unwrap();
        let s = rolling_samples(&v, w);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].end, 122);

        let v: Vec<f64> = (0..125).map(f64::from).collect();
        let s = rolling_samples(&v, w);
        assert_eq!(s.len(), 3);
        assert_eq!(&s[0].maxima[1..], &s[1].maxima[..122]);

        assert!(rolling_samples(&v[..100], w).is_empty());
        assert!(RollingWindow::new(20, 1).is_err());
    }

    #[test]
    fn csv_output() {
        let ms = extract_block_maxima(&slr(&[1.0, -3.0], 1), 1, None).unwrap();
        let mut buf = vec![];
        ms.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "block_end,maximum\n2020-01-01,1\n2020-01-02,3\n");
    }

    proptest! {
        #[test]
        fn blocks_partition_the_days(n in 1usize..200, per_day in 1usize..5, span in 1usize..4) {
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let s = slr(&v, per_day);
            let ms = extract_block_maxima(&s, span, None).unwrap();
            let days = n.div_ceil(per_day);
            prop_assert_eq!(ms.maxima.len(), days / span);
            let covered: usize = ms.maxima.iter().map(|b| b.points).sum();
            let full_days = (days / span) * span;
            prop_assert_eq!(covered, (full_days * per_day).min(n));
            prop_assert!(ms.maxima.iter().all(|b| b.maximum >= 0.0));
        }

        #[test]
        fn samples_have_k_entries_and_slide_by_step(len in 30usize..300, k in 30usize..80, step in 1usize..5) {
            let v: Vec<f64> = (0..len).map(|i| i as f64).collect();
            let s = rolling_samples(&v, RollingWindow::new(k, step).unwrap());
            if len < k {
                prop_assert!(s.is_empty());
            } else {
                prop_assert_eq!(s.last().unwrap().end, len - 1);
                for w in s.windows(2) {
                    prop_assert_eq!(w[0].maxima.len(), k);
                    prop_assert_eq!(w[1].maxima[0] - w[0].maxima[0], step as f64);
                }
            }
        }
    }
}
