//! Random inputs shared by the integration tests.
#![allow(dead_code)]

use msb_prior::generator::GeneratorMatrix;
use msb_prior::moments::MomentQuery;
use msb_prior::sampler::RngStream;
use rand::seq::SliceRandom;
use rand::Rng;

/// Dense generator with off-diagonal rates in `[0.1, 2)`.
pub fn random_generator(d: usize, rng: &mut RngStream) -> GeneratorMatrix {
    let mut rows = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut total = 0.0;
        for j in 0..d {
            if i != j {
                rows[i][j] = rng.random_range(0.1..2.0);
                total += rows[i][j];
            }
        }
        rows[i][i] = -total;
    }
    GeneratorMatrix::from_rows(&rows).expect("random rates form a valid generator")
}

/// Positive probability vector with entries bounded away from zero.
pub fn random_mu(d: usize, rng: &mut RngStream) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Up to `max_sets` disjoint nonempty sets over `0..d` with exponents
/// summing to at most `max_total` (at least 1).
pub fn random_query(d: usize, max_sets: usize, max_total: u32, rng: &mut RngStream) -> MomentQuery {
    let mut cats: Vec<usize> = (0..d).collect();
    cats.shuffle(rng);
    let n_sets = rng.random_range(1..=max_sets.min(d));
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_sets];
    // Each set gets one category; the rest land in a random set or nowhere.
    for (i, &c) in cats.iter().enumerate() {
        if i < n_sets {
            sets[i].push(c);
        } else if rng.random_bool(0.5) {
            let s = rng.random_range(0..n_sets);
            sets[s].push(c);
        }
    }
    let total = rng.random_range(1..=max_total);
    let mut exponents = vec![0u32; n_sets];
    for _ in 0..total {
        exponents[rng.random_range(0..n_sets)] += 1;
    }
    MomentQuery::new(d, sets, exponents).expect("sets are disjoint and in range")
}

/// Counts summing to exactly `n` spread uniformly over `d` categories.
pub fn random_counts(d: usize, n: u32, rng: &mut RngStream) -> Vec<u32> {
    let mut c = vec![0u32; d];
    for _ in 0..n {
        c[rng.random_range(0..d)] += 1;
    }
    c
}
