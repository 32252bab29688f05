//! Prior moments E[Π ν(A_i)^k_i] through the three evaluation paths: the
//! resolvent dynamic programme, permutation enumeration, and the fixed-θ
//! recursion.
//!
//! cargo run --example prior_moments

use msb_prior::generator::tridiagonal;
use msb_prior::moments::{
    moment_bruteforce, moment_conditional, moment_unconditional, moment_via_theta_recursion, MomentQuery,
    ResolventCache, Root, DEFAULT_BRUTE_CAP,
};
use msb_prior::Result;

fn main() -> Result<()> {
    let g = tridiagonal(5, 2.0)?;
    let theta_g = g.theta_g();

    // E[ν({1,2})^2 ν({5})]
    let q = MomentQuery::new(5, vec![vec![0, 1], vec![4]], vec![2, 1])?;
    println!("E[nu({{1,2}})^2 nu({{5}})]");
    println!("  dynamic programme      {:.15}", moment_unconditional(&g, &q)?);
    println!(
        "  enumeration            {:.15}",
        moment_bruteforce(&g, &q, Root::Stationary, DEFAULT_BRUTE_CAP)?
    );
    for factor in [1.0, 2.0, 10.0] {
        let v = moment_via_theta_recursion(&g, factor * theta_g, &q, Root::Stationary)?;
        println!("  recursion at {factor:>4} theta_G {v:.15}");
    }

    // Conditioning on the first atom's category.
    for x in 0..5 {
        println!("E[... | T1 = {}] = {:.10}", x + 1, moment_conditional(&g, &q, x)?);
    }

    // A cache reuses resolvents across many queries.
    let cache = ResolventCache::new(&g, 4)?;
    for k in 1..=4 {
        let m = cache.moment(&MomentQuery::singletons(&[k, 0, 0, 0, 0]), Root::Stationary)?;
        println!("E[nu(1)^{k}] = {m:.10}");
    }
    Ok(())
}
