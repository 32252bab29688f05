//! A 2 x 3 contingency table prior built as a product of two generators.
//! Summing the joint measure over one factor gives the marginal measure
//! of the other, so marginal moments follow the factor's own prior.
//!
//! cargo run --example contingency_table

use msb_prior::generator::{contingency_product, dirichlet_graph};
use msb_prior::moments::{moment_unconditional, MomentQuery};
use msb_prior::posterior::{posterior_mean_pmf, CountVector};
use msb_prior::Result;

fn main() -> Result<()> {
    let rows = dirichlet_graph(&[1.0, 1.0])?.with_labels(vec!["smoker".into(), "non-smoker".into()])?;
    let cols = dirichlet_graph(&[1.0, 1.0, 1.0])?.with_labels(vec!["low".into(), "mid".into(), "high".into()])?;
    let joint = contingency_product(&[&rows, &cols])?;
    println!("joint space: {:?}", joint.labels().unwrap_or_default());
    println!("theta_G = {}", joint.theta_g());

    // ν(smoker row) = ν({0, 1, 2}); its moments match the 2-category factor.
    for k in 1..=3 {
        let joint_q = MomentQuery::new(6, vec![vec![0, 1, 2]], vec![k])?;
        let row_q = MomentQuery::new(2, vec![vec![0]], vec![k])?;
        println!(
            "E[nu(smoker)^{k}]  joint {:.12}  factor {:.12}",
            moment_unconditional(&joint, &joint_q)?,
            moment_unconditional(&rows, &row_q)?
        );
    }

    let counts = CountVector::new(vec![3, 1, 0, 1, 2, 4]);
    let pmf = posterior_mean_pmf(&joint, &counts)?;
    for x in 0..6 {
        println!(
            "{:<16} count {}  posterior {:.4}",
            joint.category_name(x),
            counts.as_slice()[x],
            pmf[x]
        );
    }
    Ok(())
}
