//! Write a small pool of synthetic minute-bar files that the command-line
//! tool can analyze.
//!
//! `cargo run --release --example make_synthetic_data -- data/ 4 300`

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use gevrisk::returns::{write_bars_csv, SessionSpec};
use gevrisk::synthetic::{synthetic_bars, SyntheticConfig};

fn main() -> gevrisk::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let symbols: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let days: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    std::fs::create_dir_all(&dir)?;

    let session = SessionSpec::cn();
    for i in 0..symbols {
        let symbol = format!("SYN{i:03}");
        let cfg = SyntheticConfig {
            days,
            z: [0.8, 2.0, 4.0][i % 3],
            halt_day_rate: 0.02,
            seed: 7,
            ..Default::default()
        };
        let series = synthetic_bars(&symbol, &session, &cfg)?;
        let path = dir.join(format!("{symbol}.csv"));
        write_bars_csv(BufWriter::new(File::create(&path)?), &series.bars)?;
        println!("{}: {} bars", path.display(), series.bars.len());
    }
    Ok(())
}
