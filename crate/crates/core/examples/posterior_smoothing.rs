//! Posterior-mean histogram smoothing: six observations in 30 bins under a
//! flat Dirichlet prior and under neighbour-coupled priors.
//!
//! cargo run --example posterior_smoothing

use msb_prior::cli::presets::{FigurePreset, PresetName};
use msb_prior::posterior::{log_marginal_likelihood, posterior_mean_pmf, posterior_mean_pmf_given_t1};
use msb_prior::Result;

fn main() -> Result<()> {
    let preset = FigurePreset::new(PresetName::Normal);
    let counts = preset.counts();
    let mut columns = Vec::new();
    for prior in &preset.priors {
        let g = prior.spec.build()?;
        println!(
            "{:<24} log marginal likelihood {:.4}",
            prior.title,
            log_marginal_likelihood(&g, &counts)?
        );
        columns.push(posterior_mean_pmf(&g, &counts)?);
    }

    println!("\nbin  count      g1        g2        g3        g4");
    for x in 0..preset.dim {
        print!("{:>3}  {:>5}", x + 1, counts.as_slice()[x]);
        for c in &columns {
            print!("  {:.6}", c[x]);
        }
        println!();
    }

    // Conditioning on the first atom pulls mass towards its neighbourhood.
    let g2 = preset.prior("g2").expect("preset has g2").spec.build()?;
    let given = posterior_mean_pmf_given_t1(&g2, &counts, 0)?;
    println!(
        "\ng2 posterior mass at bin 2: {:.6} unconditional, {:.6} given T1 = 1",
        columns[1][1], given[1]
    );
    Ok(())
}
