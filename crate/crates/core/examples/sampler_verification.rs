//! Monte Carlo draws of truncated MSB measures checked against the exact
//! moment engine.
//!
//! cargo run --release --example sampler_verification

use msb_prior::generator::tridiagonal;
use msb_prior::moments::{moment_conditional, moment_unconditional, MomentQuery};
use msb_prior::numerics::ProbVector;
use msb_prior::sampler::{mc_moment_estimate, sample_data, sample_msb, support_coverage, RngStream, DEFAULT_EPS};
use msb_prior::Result;

fn main() -> Result<()> {
    let g = tridiagonal(3, 1.0)?;
    let theta = g.theta_g();

    let mut rng = RngStream::new(2024);
    let m = sample_msb(&g, theta, DEFAULT_EPS, &mut rng)?;
    println!(
        "one draw: {} atoms, residual {:.2e}, category masses {:?}",
        m.atoms.len(),
        m.residual,
        m.masses(3)
    );
    let data: Vec<usize> = sample_data(&m, 10, &mut rng).into_iter().map(|y| y + 1).collect();
    println!("ten observations from it (1-based): {data:?}");

    let n = 200_000;
    for x in 0..3 {
        for k in [1, 2] {
            let mut counts = vec![0; 3];
            counts[x] = k;
            let q = MomentQuery::singletons(&counts);
            let est = mc_moment_estimate(&g, theta, &q, n, DEFAULT_EPS, 7, None)?;
            let exact = moment_unconditional(&g, &q)?;
            println!(
                "E[nu({})^{k}]  exact {exact:.6}  MC {:.6} +/- {:.1e}  z = {:.2}",
                x + 1,
                est.estimate,
                est.std_error,
                est.z_score(exact)
            );
        }
    }

    let q = MomentQuery::singletons(&[2, 0, 0]);
    let est = mc_moment_estimate(&g, theta, &q, n, DEFAULT_EPS, 8, Some(0))?;
    println!(
        "E[nu(1)^2 | T1 = 1]  exact {:.6}  MC {:.6}",
        moment_conditional(&g, &q, 0)?,
        est.estimate
    );

    let vertices: Vec<ProbVector> = (0..3)
        .map(|i| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            ProbVector::new(v)
        })
        .collect::<Result<_>>()?;
    let hits = support_coverage(&g, theta, &vertices, 0.1, n, 9)?;
    println!("draws within 0.1 of each vertex: {hits:?}");
    Ok(())
}
