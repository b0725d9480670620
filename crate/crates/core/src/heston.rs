//! Canonical Heston simulation and the validation experiment run on it.
//!
//! The variance follows `dV = (z - V) ds + sqrt(V) dW` and the log-price
//! `dlogP = sqrt(V) dB`. Paths are stepped on a fine grid of width `epsilon`
//! and recorded at the observation scale `delta`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{multi_quantile_fit, MultiQuantileConfig};
use crate::gev::{normal_cdf, GevParams};
use crate::maxima::{block_maxima, RollingWindow};
use crate::risk::{fit_trajectory, stability, GateConfig, MonitorConfig};
use crate::rng::{derive_seed, seeded};
use crate::stats::{ks_one_sample, mean, std_dev, welch_t_test};
use crate::var::{gev_var, gp_var, DEFAULT_VAR_LEVEL};

/// Variance update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Implicit Milstein step.
    #[default]
    Milstein,
    /// Explicit Euler step, truncated at zero.
    Euler,
    /// Noise-free implicit step of the mean-reversion ODE.
    Deterministic,
    /// Variance held at its initial value.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonConfig {
    pub z: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub delta: f64,
    pub rho: f64,
    /// Initial variance; the stationary mean `z` when absent.
    pub v0: Option<f64>,
    /// Simulated and discarded before recording starts.
    pub burn_in: f64,
    pub seed: u64,
    pub dynamics: Dynamics,
}

impl HestonConfig {
    pub fn new(z: f64, delta: f64, seed: u64) -> Self {
        Self {
            z,
            epsilon: 1.0 / 14_400.0,
            horizon: 896.0,
            delta,
            rho: 0.0,
            v0: None,
            burn_in: 0.0,
            seed,
            dynamics: Dynamics::Milstein,
        }
    }

    fn ratio(a: f64, b: f64, what: &str) -> Result<usize> {
        let r = a / b;
        let n = r.round();
        if !(n >= 1.0) || (r - n).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::Config(format!("{what}: {a} is not a whole multiple of {b}")));
        }
        Ok(n as usize)
    }

    /// Fine steps per observation interval.
    pub fn steps_per_obs(&self) -> Result<usize> {
        Self::ratio(self.delta, self.epsilon, "observation scale")
    }

    pub fn observations(&self) -> Result<usize> {
        Self::ratio(self.horizon, self.delta, "horizon")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z > 0.5) {
            return Err(Error::Config(format!("z must exceed 1/2 (Feller condition), got {}", self.z)));
        }
        if !(self.epsilon > 0.0 && self.delta > 0.0 && self.horizon > 0.0) {
            return Err(Error::Config("step, observation scale and horizon must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("correlation must lie in [-1,1], got {}", self.rho)));
        }
        if let Some(v0) = self.v0 {
            if !(v0 > 0.0 && v0.is_finite()) {
                return Err(Error::Config("initial variance must be positive".into()));
            }
        }
        if !(self.burn_in >= 0.0) {
            return Err(Error::Config("burn-in must be nonnegative".into()));
        }
        self.steps_per_obs()?;
        self.observations()?;
        Ok(())
    }
}

/// A simulated path recorded at the observation scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimPath {
    pub delta: f64,
    /// Log-price at each observation time, starting at zero.
    pub logp: Vec<f64>,
    /// Spot variance at each observation time.
    pub v: Vec<f64>,
    /// Integrated variance over each observation interval.
    pub integrated_variance: Vec<f64>,
    pub clamped: usize,
    pub steps: usize,
}

/// Share of steps that may be clamped before the scheme is declared broken.
pub const MAX_CLAMP_FRACTION: f64 = 1e-3;

struct Stepper {
    z: f64,
    eps: f64,
    sqrt_eps: f64,
    rho: f64,
    rho_perp: f64,
    dynamics: Dynamics,
    v: f64,
    clamped: usize,
}

impl Stepper {
    /// Advance one fine step; returns `(dlogP, V * eps)` for the step.
    #[inline]
    fn step<R: Rng>(&mut self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let dw = self.sqrt_eps * z1;
        let db = self.rho * dw + self.rho_perp * self.sqrt_eps * z2;
        let v = self.v;
        let sv = v.sqrt();
        let next = match self.dynamics {
            Dynamics::Milstein => (v + self.z * self.eps + sv * dw + 0.25 * (dw * dw - self.eps)) / (1.0 + self.eps),
            Dynamics::Euler => v + (self.z - v) * self.eps + sv * dw,
            Dynamics::Deterministic => (v + self.z * self.eps) / (1.0 + self.eps),
            Dynamics::Frozen => v,
        };
        self.v = if next < 0.0 {
            self.clamped += 1;
            0.0
        } else {
            next
        };
        (sv * db, v * self.eps)
    }
}

/// Simulate one path. Deterministic for a given configuration.
pub fn simulate_path(cfg: &HestonConfig) -> Result<SimPath> {
    cfg.validate()?;
    let per_obs = cfg.steps_per_obs()?;
    let n_obs = cfg.observations()?;
    let mut rng = seeded(cfg.seed);
    let mut s = Stepper {
        z: cfg.z,
        eps: cfg.epsilon,
        sqrt_eps: cfg.epsilon.sqrt(),
        rho: cfg.rho,
        rho_perp: (1.0 - cfg.rho * cfg.rho).max(0.0).sqrt(),
        dynamics: cfg.dynamics,
        v: cfg.v0.unwrap_or(cfg.z),
        clamped: 0,
    };
    let burn = (cfg.burn_in / cfg.epsilon).round() as usize;
    for _ in 0..burn {
        s.step(&mut rng);
    }
    let mut logp = Vec::with_capacity(n_obs + 1);
    let mut v = Vec::with_capacity(n_obs + 1);
    let mut iv = Vec::with_capacity(n_obs);
    let mut lp = 0.0;
    logp.push(lp);
    v.push(s.v);
    for _ in 0..n_obs {
        let mut acc = 0.0;
        for _ in 0..per_obs {
            let (dl, dv) = s.step(&mut rng);
            lp += dl;
            acc += dv;
        }
        logp.push(lp);
        v.push(s.v);
        iv.push(acc);
    }
    let steps = burn + n_obs * per_obs;
    if s.clamped as f64 > MAX_CLAMP_FRACTION * steps as f64 {
        return Err(Error::Numerical(format!(
            "variance clamped at zero in {} of {} steps (z={})",
            s.clamped, steps, cfg.z
        )));
    }
    Ok(SimPath { delta: cfg.delta, logp, v, integrated_variance: iv, clamped: s.clamped, steps })
}

impl SimPath {
    /// The same path observed every `factor` intervals.
    pub fn coarsen(&self, factor: usize) -> Result<SimPath> {
        if factor == 0 {
            return Err(Error::domain("coarsening factor must be positive"));
        }
        let n = self.integrated_variance.len() / factor;
        Ok(SimPath {
            delta: self.delta * factor as f64,
            logp: (0..=n).map(|i| self.logp[i * factor]).collect(),
            v: (0..=n).map(|i| self.v[i * factor]).collect(),
            integrated_variance: self.integrated_variance.chunks_exact(factor).map(|c| c.iter().sum()).collect(),
            clamped: self.clamped,
            steps: self.steps,
        })
    }

    pub fn log_returns(&self) -> Vec<f64> {
        self.logp.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SlrMode {
    /// Divide by the square root of the integrated variance.
    #[default]
    Exact,
    /// Divide by `sqrt(V_h * delta)` at the interval start.
    Spot,
}

/// Standardized log-returns of a path. Intervals with zero variance are
/// skipped.
pub fn standardized_returns(path: &SimPath, mode: SlrMode) -> Vec<f64> {
    path.log_returns()
        .iter()
        .enumerate()
        .filter_map(|(i, lr)| {
            let var = match mode {
                SlrMode::Exact => path.integrated_variance[i],
                SlrMode::Spot => path.v[i] * path.delta,
            };
            (var > 0.0).then(|| lr / var.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub zs: Vec<f64>,
    pub deltas: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub horizon: f64,
    pub rho: f64,
    pub block_duration: f64,
    pub window: usize,
    pub slr_mode: SlrMode,
    pub estimator: MultiQuantileConfig,
    pub gate: GateConfig,
    /// Also compare GEV-VaR with GP-VaR on non-overlapping windows.
    pub gp_compare: bool,
    pub gp_threshold_quantile: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk(2024)
    }
}

impl ExperimentConfig {
    /// Two `z` values, three observation scales, 20 repetitions.
    pub fn desk(seed: u64) -> Self {
        Self {
            zs: vec![0.55, 3.0],
            deltas: vec![1.0 / 240.0, 1.0 / 48.0, 1.0 / 24.0],
            reps: 20,
            seed,
            epsilon: 1.0 / 14_400.0,
            horizon: 896.0,
            rho: 0.0,
            block_duration: 2.0,
            window: 123,
            slr_mode: SlrMode::Exact,
            estimator: MultiQuantileConfig::default(),
            gate: GateConfig::default(),
            gp_compare: true,
            gp_threshold_quantile: 0.9,
        }
    }

    /// Eight `z` values and 600 repetitions.
    pub fn full(seed: u64) -> Self {
        Self { zs: vec![0.55, 1.0, 1.5, 3.0, 4.0, 5.0, 6.0, 7.0], reps: 600, ..Self::desk(seed) }
    }

    fn finest_delta(&self) -> f64 {
        self.deltas.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.zs.is_empty() || self.deltas.is_empty() {
            return Err(Error::Config("experiment needs at least one z and one observation scale".into()));
        }
        if self.reps == 0 {
            return Err(Error::Config("experiment needs at least one repetition".into()));
        }
        RollingWindow::new(self.window, 1)?;
        self.estimator.validate()?;
        let fine = self.finest_delta();
        for &z in &self.zs {
            let mut h = HestonConfig::new(z, fine, 0);
            h.epsilon = self.epsilon;
            h.horizon = self.horizon;
            h.rho = self.rho;
            h.validate()?;
        }
        for &d in &self.deltas {
            HestonConfig::ratio(d, fine, "observation scale")?;
            HestonConfig::ratio(self.block_duration, d, "block duration")?;
            HestonConfig::ratio(self.horizon, d, "horizon")?;
        }
        Ok(())
    }
}

/// Outcome of one repetition at one `(z, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub z: f64,
    pub delta: f64,
    pub rep: usize,
    pub block_size: usize,
    pub blocks: usize,
    pub fits: usize,
    pub passing: usize,
    /// Mean shape, location and scale over passing fits.
    pub m_evi: f64,
    pub mu_bar: f64,
    pub sigma_bar: f64,
    /// 99% quantile of the GEV with the mean parameters.
    pub var99: f64,
    pub mean_var99: f64,
    pub sti: f64,
    pub stable: bool,
    pub ks_pass_rate: f64,
    pub gate_pass_rate: f64,
    pub mpi_max: f64,
    pub slr_ks_pvalue: f64,
    pub slr_std: f64,
    pub clamped: usize,
}

/// GEV-VaR and GP-VaR on one non-overlapping window of the same data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarComparison {
    pub z: f64,
    pub delta: f64,
    pub rep: usize,
    pub window: usize,
    pub gev_var: f64,
    pub gp_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepFailure {
    pub z: f64,
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub delta: f64,
    /// `None` for the pool over all `z`.
    pub z: Option<f64>,
    pub reps: usize,
    pub m_evi: f64,
    pub m_evi_se: f64,
    pub mu_bar: f64,
    pub sigma_bar: f64,
    /// VaR of the GEV at the averaged parameters.
    pub var99: f64,
    pub stable_fraction: f64,
    pub ks_pass_rate: f64,
    pub mpi_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZComparison {
    pub delta: f64,
    pub z_a: f64,
    pub z_b: f64,
    /// Welch two-sided p-value for equal mean mEVI.
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
    pub var_comparisons: Vec<VarComparison>,
    pub failures: Vec<RepFailure>,
}

/// Published mean parameters and VaR per observation scale:
/// `(delta, mEVI, mu, sigma, VaR)`.
pub const REFERENCE_TABLE: [(f64, f64, f64, f64, f64); 3] = [
    (1.0 / 240.0, -0.08, 3.08, 0.30, 4.23),
    (1.0 / 48.0, -0.10, 2.56, 0.35, 3.85),
    (1.0 / 24.0, -0.11, 2.31, 0.37, 3.67),
];

/// Minimum observations per block before the runner warns.
pub const MIN_BLOCK_OBSERVATIONS: usize = 20;

fn run_delta(
    cfg: &ExperimentConfig,
    z: f64,
    rep: usize,
    path: &SimPath,
) -> Result<(ExperimentRow, Vec<VarComparison>)> {
    let slr = standardized_returns(path, cfg.slr_mode);
    let slr_ks_pvalue = ks_one_sample(&slr, normal_cdf)?.pvalue;
    let m = HestonConfig::ratio(cfg.block_duration, path.delta, "block duration")?;
    if m < MIN_BLOCK_OBSERVATIONS {
        log::warn!("delta={}: only {m} observations per block", path.delta);
    }
    let maxima = block_maxima(&slr, m)?;
    let label = format!("z={z}/delta={}/rep={rep}", path.delta);
    let mc = MonitorConfig {
        window: RollingWindow::new(cfg.window, 1)?,
        estimator: cfg.estimator.clone(),
        gate: cfg.gate,
        var_level: DEFAULT_VAR_LEVEL,
    };
    let mut traj = fit_trajectory(&label, &maxima, None, &mc, derive_seed(cfg.seed, "gof", rep as u64))?;
    let fits = traj.records.len();
    let passing: Vec<GevParams> = traj.records.iter().filter(|r| r.pass).filter_map(|r| r.params).collect();
    let ks_pass = traj.records.iter().filter(|r| r.ks_pvalue.is_some_and(|p| p > cfg.gate.ks_level)).count();
    let mpi_max = traj.records.iter().filter_map(|r| r.mpi).fold(0.0, f64::max);
    let st = stability(&traj, cfg.window, &cfg.estimator)?;
    traj.stability = Some(st);

    let xs: Vec<f64> = passing.iter().map(GevParams::xi).collect();
    let mus: Vec<f64> = passing.iter().map(GevParams::mu).collect();
    let sigmas: Vec<f64> = passing.iter().map(GevParams::sigma).collect();
    let (m_evi, mu_bar, sigma_bar) = (mean(&xs), mean(&mus), mean(&sigmas));
    let var99 = gev_var(&GevParams::new(m_evi, mu_bar, sigma_bar)?, DEFAULT_VAR_LEVEL)?;
    let mean_var99 = mean(&traj.records.iter().filter(|r| r.pass).filter_map(|r| r.var99).collect::<Vec<_>>());

    let mut comparisons = Vec::new();
    if cfg.gp_compare {
        // GP tail level matching the 99% quantile of a block maximum
        let q_obs = DEFAULT_VAR_LEVEL.powf(1.0 / m as f64);
        for (w, chunk) in maxima.chunks_exact(cfg.window).enumerate() {
            let obs = &slr[w * cfg.window * m..(w + 1) * cfg.window * m];
            let abs: Vec<f64> = obs.iter().map(|x| x.abs()).collect();
            let gev = multi_quantile_fit(chunk, &cfg.estimator).and_then(|f| gev_var(&f.params, DEFAULT_VAR_LEVEL));
            let gp = gp_var(&abs, q_obs, cfg.gp_threshold_quantile).map(|f| f.var);
            match (gev, gp) {
                (Ok(g), Ok(p)) => comparisons.push(VarComparison { z, delta: path.delta, rep, window: w, gev_var: g, gp_var: p }),
                (g, p) => log::warn!("{label} window {w}: VaR comparison skipped ({:?}, {:?})", g.err(), p.err()),
            }
        }
    }

    let row = ExperimentRow {
        z,
        delta: path.delta,
        rep,
        block_size: m,
        blocks: maxima.len(),
        fits,
        passing: passing.len(),
        m_evi,
        mu_bar,
        sigma_bar,
        var99,
        mean_var99,
        sti: st.sti,
        stable: st.stable,
        ks_pass_rate: ks_pass as f64 / fits as f64,
        gate_pass_rate: passing.len() as f64 / fits as f64,
        mpi_max,
        slr_ks_pvalue,
        slr_std: std_dev(&slr),
        clamped: path.clamped,
    };
    Ok((row, comparisons))
}

fn run_rep(cfg: &ExperimentConfig, z: f64, rep: usize) -> Result<(Vec<ExperimentRow>, Vec<VarComparison>)> {
    let fine = cfg.finest_delta();
    let mut h = HestonConfig::new(z, fine, derive_seed(cfg.seed + rep as u64, &format!("z={z}"), 0));
    h.epsilon = cfg.epsilon;
    h.horizon = cfg.horizon;
    h.rho = cfg.rho;
    let path = simulate_path(&h)?;
    let mut rows = Vec::new();
    let mut comps = Vec::new();
    for &d in &cfg.deltas {
        let factor = HestonConfig::ratio(d, fine, "observation scale")?;
        let coarse = if factor == 1 { path.clone() } else { path.coarsen(factor)? };
        let (r, c) = run_delta(cfg, z, rep, &coarse)?;
        rows.push(r);
        comps.extend(c);
    }
    Ok((rows, comps))
}

/// Simulate every `(z, rep)` path once, observe it at each scale, and fit
/// rolling GEV models to the block maxima of its standardized returns.
/// Repetitions run in parallel; a failed repetition is logged and left out.
pub fn heston_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg.zs.iter().flat_map(|&z| (0..cfg.reps).map(move |r| (z, r))).collect();
    let results: Vec<_> = jobs.par_iter().map(|&(z, rep)| ((z, rep), run_rep(cfg, z, rep))).collect();
    let mut table = ExperimentTable { rows: Vec::new(), var_comparisons: Vec::new(), failures: Vec::new() };
    for ((z, rep), res) in results {
        match res {
            Ok((rows, comps)) => {
                table.rows.extend(rows);
                table.var_comparisons.extend(comps);
            }
            Err(e) => {
                log::warn!("z={z} rep={rep} failed: {e}");
                table.failures.push(RepFailure { z, rep, error: e.to_string() });
            }
        }
    }
    table.rows.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.z.total_cmp(&b.z)).then(a.rep.cmp(&b.rep)));
    Ok(table)
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl ExperimentTable {
    pub fn deltas(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rows.iter().map(|r| r.delta).collect();
        d.sort_by(f64::total_cmp);
        d.dedup_by(|a, b| same(*a, *b));
        d
    }

    pub fn zs(&self) -> Vec<f64> {
        let mut z: Vec<f64> = self.rows.iter().map(|r| r.z).collect();
        z.sort_by(f64::total_cmp);
        z.dedup_by(|a, b| same(*a, *b));
        z
    }

    pub fn rows_at(&self, delta: f64, z: Option<f64>) -> Vec<&ExperimentRow> {
        self.rows
            .iter()
            .filter(|r| same(r.delta, delta) && z.is_none_or(|z| same(r.z, z)))
            .collect()
    }

    fn aggregate_rows(delta: f64, z: Option<f64>, rows: &[&ExperimentRow]) -> Result<Aggregate> {
        if rows.is_empty() {
            return Err(Error::EmptySeries(format!("no repetitions at delta={delta}")));
        }
        let col = |f: fn(&ExperimentRow) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let xs = col(|r| r.m_evi);
        let (m_evi, mu_bar, sigma_bar) = (mean(&xs), mean(&col(|r| r.mu_bar)), mean(&col(|r| r.sigma_bar)));
        Ok(Aggregate {
            delta,
            z,
            reps: rows.len(),
            m_evi,
            m_evi_se: std_dev(&xs) / (rows.len() as f64).sqrt(),
            mu_bar,
            sigma_bar,
            var99: gev_var(&GevParams::new(m_evi, mu_bar, sigma_bar)?, DEFAULT_VAR_LEVEL)?,
            stable_fraction: rows.iter().filter(|r| r.stable).count() as f64 / rows.len() as f64,
            ks_pass_rate: mean(&col(|r| r.ks_pass_rate)),
            mpi_max: col(|r| r.mpi_max).into_iter().fold(0.0, f64::max),
        })
    }

    /// Per-scale summaries, pooled over `z` and for each `z`.
    pub fn aggregate(&self) -> Result<Vec<Aggregate>> {
        let mut out = Vec::new();
        for d in self.deltas() {
            out.push(Self::aggregate_rows(d, None, &self.rows_at(d, None))?);
            for z in self.zs() {
                out.push(Self::aggregate_rows(d, Some(z), &self.rows_at(d, Some(z)))?);
            }
        }
        Ok(out)
    }

    /// Welch tests of equal mean mEVI between every pair of `z` values.
    pub fn z_comparisons(&self) -> Result<Vec<ZComparison>> {
        let zs = self.zs();
        let mut out = Vec::new();
        for d in self.deltas() {
            let by_z: BTreeMap<usize, Vec<f64>> = zs
                .iter()
                .enumerate()
                .map(|(i, &z)| (i, self.rows_at(d, Some(z)).iter().map(|r| r.m_evi).collect()))
                .collect();
            for i in 0..zs.len() {
                for j in i + 1..zs.len() {
                    let pvalue = welch_t_test(&by_z[&i], &by_z[&j])?;
                    out.push(ZComparison { delta: d, z_a: zs[i], z_b: zs[j], pvalue });
                }
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["z", "delta", "rep", "mEVI", "mu_bar", "sigma_bar", "var99", "sti", "ks_pass_rate", "mpi_max"])?;
        for r in &self.rows {
            w.write_record([
                crate::num(r.z),
                crate::num(r.delta),
                r.rep.to_string(),
                crate::num(r.m_evi),
                crate::num(r.mu_bar),
                crate::num(r.sigma_bar),
                crate::num(r.var99),
                crate::num(r.sti),
                crate::num(r.ks_pass_rate),
                crate::num(r.mpi_max),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
