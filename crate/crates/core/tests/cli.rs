use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gevrisk::returns::{write_bars_csv, SessionSpec};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};

fn gevrisk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gevrisk")).args(args).output().expect("binary runs")
}

fn write_symbol(dir: &Path, symbol: &str, days: usize) {
    let cfg = SyntheticConfig { days, halt_day_rate: 0.02, ..Default::default() };
    let s = synthetic_bars(symbol, &SessionSpec::cn(), &cfg).unwrap();
    write_bars_csv(BufWriter::new(File::create(dir.join(format!("{symbol}.csv"))).unwrap()), &s.bars).unwrap();
}

fn run_dir(out: &Output) -> PathBuf {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    PathBuf::from(String::from_utf8(out.stdout.clone()).unwrap().lines().last().unwrap().trim())
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn empty_data_dir_fails_with_no_symbols() {
    let data = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let r = gevrisk(&["--out", out.path().to_str().unwrap(), "analyze", "--data", data.path().to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("no symbols"));
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn analyze_writes_reports_and_reruns_identically() {
    let data = tempfile::tempdir().unwrap();
    write_symbol(data.path(), "AAA", 420);
    std::fs::write(data.path().join("notes.txt"), "ignored").unwrap();
    let out = tempfile::tempdir().unwrap();
    let args = ["--out", out.path().to_str().unwrap(), "--jobs", "2", "analyze", "--data", data.path().to_str().unwrap()];
    let dir = run_dir(&gevrisk(&args));
    for f in ["manifest.json", "config.toml", "summary.json", "cross_section.csv", "AAA/slr.csv", "AAA/maxima.csv", "AAA/trajectory.csv", "AAA/report.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "analyze");
    assert_eq!(manifest["symbols"], serde_json::json!(["AAA"]));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary[0]["m_evi"].is_f64());
    let traj = std::fs::read_to_string(dir.join("AAA/trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,xi,mu,sigma,ks_pvalue,mpi,var99,pass\n"));
    assert!(traj.lines().count() > 30);

    let first = tree(&dir);
    let again = run_dir(&gevrisk(&args));
    assert_eq!(again, dir);
    assert_eq!(first, tree(&again));

    // the written config reproduces the run
    let cfg = dir.join("config.toml");
    let copy = out.path().join("effective.toml");
    std::fs::copy(&cfg, &copy).unwrap();
    let replay = run_dir(&gevrisk(&["--out", out.path().to_str().unwrap(), "--config", copy.to_str().unwrap(), "analyze", "--data", data.path().to_str().unwrap()]));
    assert_eq!(replay, dir);
}

#[test]
fn backtest_jumps_and_changepoints_run() {
    let data = tempfile::tempdir().unwrap();
    write_symbol(data.path(), "AAA", 420);
    write_symbol(data.path(), "BBB", 420);
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let d = data.path().to_str().unwrap();
    let bt = run_dir(&gevrisk(&["--out", o, "backtest", "--data", d]));
    let values = std::fs::read_to_string(bt.join("values.csv")).unwrap();
    assert!(values.starts_with("date,strategy,value\n"));
    for s in ["gev", "normal", "equal"] {
        assert!(values.contains(&format!(",{s},")));
    }
    assert!(bt.join("weights.json").is_file());
    assert_eq!(tree(&bt), tree(&run_dir(&gevrisk(&["--out", o, "backtest", "--data", d]))));

    let j = run_dir(&gevrisk(&["--out", o, "jumps", "--data", d]));
    assert!(j.join("jumps/AAA.csv").is_file() && j.join("jumps_summary.json").is_file());
    let c = run_dir(&gevrisk(&["--out", o, "--seed", "5", "changepoints", "--data", d]));
    assert!(std::fs::read_to_string(c.join("changepoints.csv")).unwrap().starts_with("symbol,index,date,detected_at,posterior\n"));
}

#[test]
fn feller_violation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\n[simulate]\nzs = [0.4, 3.0]\n").unwrap();
    let r = gevrisk(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("Feller"));

    std::fs::write(&cfg, "schema_version = 1\nbogus = true\n").unwrap();
    let r = gevrisk(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn small_simulation_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.toml");
    std::fs::write(&cfg, "schema_version = 1\n[simulate]\nzs = [3.0]\ndeltas = [0.041666666666666664]\nreps = 2\nhorizon = 400.0\nepsilon = 0.001388888888888889\n").unwrap();
    let r = gevrisk(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    let run = run_dir(&r);
    let table = std::fs::read_to_string(run.join("experiment.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(String::from_utf8_lossy(&r.stdout).contains("(ref -0.11)"));
}
