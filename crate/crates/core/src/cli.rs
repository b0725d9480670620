//! Command-line front end. Every run writes into
//! `<out>/<command>/<run-id>/` together with a manifest and the effective
//! configuration; the run id hashes the configuration and the input files,
//! so identical reruns land in, and rewrite, the same directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::heston::{heston_experiment, ExperimentConfig, ExperimentTable, REFERENCE_TABLE};
use crate::maxima::MaximaSeries;
use crate::pipeline::{analyze_dir, backtest_pool, discover_symbols, pool_changepoints, pool_jumps, PoolAnalysis};
use crate::returns::write_slr_csv;
use crate::risk::{pool_summary, write_trajectory_csv, CrossSection};
use crate::rng::fnv1a;
use crate::var::write_backtest_csv;

#[derive(Debug, Parser)]
#[command(name = "gevrisk", version, about = "Extreme-value risk analysis of high-frequency returns")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, standardize and fit rolling GEV risk models per symbol.
    Analyze {
        /// Directory of per-symbol bar files (`<symbol>.csv`).
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the Heston validation experiment.
    Simulate {
        /// Eight z values and 600 repetitions instead of the desk grid.
        #[arg(long)]
        full: bool,
    },
    /// Backtest VaR-weighted portfolios on the analyzed pool.
    Backtest {
        /// Directory of per-symbol bar files (`<symbol>.csv`).
        #[arg(long)]
        data: PathBuf,
    },
    /// Flag returns above the prevailing GEV-VaR.
    Jumps {
        /// Directory of per-symbol bar files (`<symbol>.csv`).
        #[arg(long)]
        data: PathBuf,
    },
    /// Detect changepoints in each symbol's EVI trajectory.
    Changepoints {
        /// Directory of per-symbol bar files (`<symbol>.csv`).
        #[arg(long)]
        data: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analyze { .. } => "analyze",
            Command::Simulate { .. } => "simulate",
            Command::Backtest { .. } => "backtest",
            Command::Jumps { .. } => "jumps",
            Command::Changepoints { .. } => "changepoints",
        }
    }

    fn data(&self) -> Option<&Path> {
        match self {
            Command::Simulate { .. } => None,
            Command::Analyze { data } | Command::Backtest { data } | Command::Jumps { data } | Command::Changepoints { data } => Some(data),
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    run_id: &'a str,
    schema_version: u32,
    seed: u64,
    inputs: Vec<String>,
    files: Vec<String>,
    symbols: Vec<String>,
    failures: serde_json::Value,
}

/// Files written by one run.
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl RunOutput {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Configuration after applying the command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.simulate.seed = seed;
    }
    if let Command::Simulate { full: true } = cli.command {
        let full = ExperimentConfig::full(cfg.simulate.seed);
        cfg.simulate.zs = full.zs;
        cfg.simulate.reps = full.reps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_id(command: &str, config_text: &str, data: Option<&Path>) -> Result<(String, Vec<String>)> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(command.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(config_text.as_bytes());
    let mut inputs = Vec::new();
    if let Some(dir) = data {
        for (symbol, path) in discover_symbols(dir)? {
            bytes.push(0);
            bytes.extend_from_slice(symbol.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(&std::fs::read(&path)?);
            inputs.push(format!("{symbol}.csv"));
        }
    }
    Ok((format!("{:016x}", fnv1a(&bytes)), inputs))
}

/// Execute one command and return where its outputs went.
pub fn run(cli: &Cli) -> Result<RunOutput> {
    let cfg = effective_config(cli)?;
    let config_text = cfg.to_toml()?;
    let command = cli.command.name();
    let (id, inputs) = run_id(command, &config_text, cli.command.data())?;
    let dir = cli.out.join(command).join(&id);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    let mut out = RunOutput { dir, files: Vec::new() };
    {
        let mut w = out.create("config.toml")?;
        w.write_all(config_text.as_bytes())?;
        w.flush()?;
    }

    let mut symbols = Vec::new();
    let failures;
    match &cli.command {
        Command::Simulate { .. } => {
            let table = heston_experiment(&cfg.simulate)?;
            write_simulation(&mut out, &table)?;
            for line in reference_comparison(&table)? {
                println!("{line}");
            }
            failures = serde_json::to_value(&table.failures)?;
        }
        Command::Analyze { data } | Command::Backtest { data } | Command::Jumps { data } | Command::Changepoints { data } => {
            let pool = analyze_dir(data, &cfg)?;
            symbols = pool.symbols.iter().map(|s| s.symbol.clone()).collect();
            failures = serde_json::to_value(&pool.failures)?;
            match &cli.command {
                Command::Analyze { .. } => write_analysis(&mut out, &pool)?,
                Command::Backtest { .. } => {
                    let runs = backtest_pool(&pool, &cfg)?;
                    let mut w = out.create("values.csv")?;
                    write_backtest_csv(&mut w, &runs)?;
                    w.flush()?;
                    let snapshots: Vec<_> = runs.iter().flat_map(|r| r.snapshots.iter()).collect();
                    out.json("weights.json", &snapshots)?;
                }
                Command::Jumps { .. } => {
                    let reports = pool_jumps(&pool)?;
                    for r in &reports {
                        let mut w = out.create(&format!("jumps/{}.csv", r.symbol))?;
                        r.write_csv(&mut w)?;
                    }
                    let summary: Vec<_> = reports
                        .iter()
                        .map(|r| serde_json::json!({"symbol": r.symbol, "jumps": r.jumps.len(), "checked": r.checked, "skipped": r.skipped}))
                        .collect();
                    out.json("jumps_summary.json", &summary)?;
                }
                Command::Changepoints { .. } => {
                    let mut w = csv::Writer::from_writer(out.create("changepoints.csv")?);
                    w.write_record(["symbol", "index", "date", "detected_at", "posterior"])?;
                    for (rep, dates) in pool_changepoints(&pool, &cfg) {
                        for c in &rep.changepoints {
                            let date = dates.get(c.t).map_or_else(String::new, |d| d.to_string());
                            w.write_record([rep.series.clone(), c.t.to_string(), date, c.detected_at.to_string(), crate::num(c.posterior)])?;
                        }
                    }
                    w.flush()?;
                }
                Command::Simulate { .. } => unreachable!(),
            }
        }
    }

    out.files.sort();
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = Manifest {
        command,
        run_id: &id,
        schema_version: cfg.schema_version,
        seed: cfg.seed,
        inputs,
        files,
        symbols,
        failures,
    };
    out.json("manifest.json", &manifest)?;
    Ok(out)
}

fn write_maxima(out: &mut RunOutput, m: &MaximaSeries) -> Result<()> {
    let mut w = out.create(&format!("{}/maxima.csv", m.symbol))?;
    m.write_csv(&mut w)
}

fn write_analysis(out: &mut RunOutput, pool: &PoolAnalysis) -> Result<()> {
    for s in &pool.symbols {
        let mut w = out.create(&format!("{}/slr.csv", s.symbol))?;
        write_slr_csv(&mut w, &s.slr)?;
        write_maxima(out, &s.maxima)?;
        let mut w = out.create(&format!("{}/trajectory.csv", s.symbol))?;
        write_trajectory_csv(&mut w, &s.trajectory)?;
        out.json(&format!("{}/report.json", s.symbol), s)?;
    }
    let summary = pool_summary(&pool.trajectories());
    write_cross_section(out, &summary.cross_section)?;
    out.json("summary.json", &summary.symbols)
}

fn write_cross_section(out: &mut RunOutput, cs: &[CrossSection]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out.create("cross_section.csv")?);
    w.write_record(["date", "symbols", "evi_05", "evi_50", "evi_95", "var_05", "var_50", "var_95"])?;
    for c in cs {
        w.write_record([
            c.time.to_string(),
            c.symbols.to_string(),
            crate::num(c.evi.low),
            crate::num(c.evi.mid),
            crate::num(c.evi.high),
            crate::num(c.var.low),
            crate::num(c.var.mid),
            crate::num(c.var.high),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_simulation(out: &mut RunOutput, table: &ExperimentTable) -> Result<()> {
    let mut w = out.create("experiment.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    out.json("aggregate.json", &table.aggregate()?)?;
    out.json("z_comparison.json", &table.z_comparisons()?)?;
    let mut w = csv::Writer::from_writer(out.create("var_comparison.csv")?);
    w.write_record(["z", "delta", "rep", "window", "gev_var", "gp_var"])?;
    for c in &table.var_comparisons {
        w.write_record([
            crate::num(c.z),
            crate::num(c.delta),
            c.rep.to_string(),
            c.window.to_string(),
            crate::num(c.gev_var),
            crate::num(c.gp_var),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line per observation scale with a published reference.
pub fn reference_comparison(table: &ExperimentTable) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    for a in table.aggregate()?.iter().filter(|a| a.z.is_none()) {
        if let Some(r) = REFERENCE_TABLE.iter().find(|r| (r.0 - a.delta).abs() < 1e-12) {
            lines.push(format!(
                "delta=1/{:.0}: mEVI {:.3} (ref {:.2}), mu {:.2} (ref {:.2}), sigma {:.2} (ref {:.2}), VaR {:.2} (ref {:.2})",
                1.0 / a.delta,
                a.m_evi,
                r.1,
                a.mu_bar,
                r.2,
                a.sigma_bar,
                r.3,
                a.var99,
                r.4
            ));
        }
    }
    Ok(lines)
}

/// Parse arguments, run, and map the outcome to a process exit code. On
/// failure a one-line JSON error summary goes to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            return report(&Error::Config("--jobs must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match run(&cli) {
        Ok(out) => {
            println!("{}", out.dir.display());
            0
        }
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> i32 {
    let summary = serde_json::json!({"error": e.kind(), "exit_code": e.exit_code(), "message": e.to_string()});
    eprintln!("{summary}");
    e.exit_code()
}
