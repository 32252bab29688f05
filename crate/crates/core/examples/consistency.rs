//! The posterior mean approaches the data-generating pmf as counts grow.
//!
//! cargo run --release --example consistency

use msb_prior::generator::tridiagonal;
use msb_prior::posterior::{posterior_mean_pmf, CountVector};
use msb_prior::Result;

fn main() -> Result<()> {
    let eta = [0.1, 0.2, 0.3, 0.4];
    let g = tridiagonal(4, 2.0)?;
    for n in [10u32, 30, 100] {
        let counts = CountVector::new(eta.iter().map(|e| (e * n as f64).round() as u32).collect());
        let pmf = posterior_mean_pmf(&g, &counts)?;
        let dist = (0..4).map(|x| (pmf[x] - eta[x]).abs()).fold(0.0, f64::max);
        println!(
            "n = {n:>3}  counts {:?}  posterior {:.4?}  max |p - eta| = {dist:.4}",
            counts.as_slice(),
            pmf.as_slice()
        );
    }
    Ok(())
}
