//! Distribution function, density, quantiles and sampling of the GEV family
//! across its three tail regimes.

use gevrisk::gev::{gev_sample, GevParams};

fn main() -> gevrisk::Result<()> {
    for xi in [-0.3, 0.0, 0.3] {
        let p = GevParams::new(xi, 3.0, 0.5)?;
        println!("xi = {xi:+.1}  support [{:.3}, {:.3}]", p.lower_endpoint(), p.upper_endpoint());
        for q in [0.01, 0.5, 0.99] {
            let y = p.quantile(q)?;
            println!("  q = {q:<4}  y = {y:8.4}  cdf(y) = {:.6}  pdf(y) = {:.4}", p.cdf(y), p.pdf(y));
        }
        let sample = gev_sample(&p, 100_000, 11)?;
        let above = sample.iter().filter(|&&y| y > p.quantile(0.99).unwrap()).count();
        println!("  share of 100000 draws above the 99% quantile: {:.4}", above as f64 / sample.len() as f64);
    }
    Ok(())
}
