//! Desk-scale rerun of the Heston validation: mean GEV parameters and VaR
//! of |SLR| block maxima at three observation scales.
//!
//! Run with `cargo run --release --example heston_table [-- --full]`.

use gevrisk::heston::{heston_experiment, ExperimentConfig};
use gevrisk::stats::{f_test_less, variance};

fn main() -> gevrisk::Result<()> {
    env_logger::init();
    let full = std::env::args().any(|a| a == "--full");
    let cfg = if full { ExperimentConfig::full(2024) } else { ExperimentConfig::desk(2024) };
    let start = std::time::Instant::now();
    let table = heston_experiment(&cfg)?;
    println!("{} paths in {:.1?}", cfg.zs.len() * cfg.reps, start.elapsed());

    println!("{:>8} {:>6} {:>8} {:>7} {:>7} {:>6} {:>7} {:>7} {:>9}", "delta", "z", "mEVI", "mu", "sigma", "VaR", "stable", "ks>.05", "mpi_max");
    for a in table.aggregate()? {
        let z = a.z.map_or("all".to_string(), |z| format!("{z}"));
        println!(
            "{:>8.5} {:>6} {:>8.4} {:>7.3} {:>7.3} {:>6.3} {:>7.2} {:>7.4} {:>9.1e}",
            a.delta, z, a.m_evi, a.mu_bar, a.sigma_bar, a.var99, a.stable_fraction, a.ks_pass_rate, a.mpi_max
        );
    }
    for c in table.z_comparisons()? {
        println!("delta {:.5}: mEVI z={} vs z={} Welch p = {:.3}", c.delta, c.z_a, c.z_b, c.pvalue);
    }
    for d in table.deltas() {
        let cmp: Vec<_> = table.var_comparisons.iter().filter(|c| (c.delta - d).abs() < 1e-12).collect();
        let gev: Vec<f64> = cmp.iter().map(|c| c.gev_var).collect();
        let gp: Vec<f64> = cmp.iter().map(|c| c.gp_var).collect();
        if gev.len() > 2 {
            let f = f_test_less(&gev, &gp)?;
            println!(
                "delta {:.5}: {} windows, var(GEV-VaR) = {:.4}, var(GP-VaR) = {:.4}, F-test p = {:.3}",
                d,
                gev.len(),
                variance(&gev),
                variance(&gp),
                f.pvalue_less
            );
        }
    }
    let normality: Vec<_> = table.rows.iter().filter(|r| r.rep == 0).map(|r| (r.z, r.delta, r.slr_ks_pvalue)).collect();
    for (z, d, p) in normality {
        println!("SLR normality z={z} delta={d:.5}: KS p = {p:.3}");
    }
    Ok(())
}
