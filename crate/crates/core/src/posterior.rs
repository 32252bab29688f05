//! Posterior moments given multinomial counts, and the posterior-mean pmf.
//!
//! Given counts `k⃗` with total `n`, the posterior moment of `Π ν(w)^{l_w}` is
//! the ratio of prior moments `E[Π ν^{k+l}] / E[Π ν^k]`. Both numerator and
//! denominator come out of one lattice sweep, so the ratio is taken between
//! unnormalized sums that share resolvents and scale bookkeeping:
//!
//! ```text
//! #S(k⃗)/#S(k⃗+l⃗) · rootᵀU(k⃗+l⃗) / rootᵀU(k⃗)
//! ```
//!
//! Posterior quantities depend on the data only through [`CountVector`]; the
//! order of observations never enters.

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::moments::{self, MomentQuery, ResolventCache, Root, ScaledVector};
use crate::numerics::ProbVector;

/// Tolerance on the total mass of a computed posterior pmf.
pub const PMF_SUM_TOLERANCE: f64 = 1e-10;

/// Observed multinomial counts, one entry per category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector(Vec<u32>);

impl CountVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// Tallies 0-based observations into `dim` categories.
    pub fn from_observations(dim: usize, observations: &[usize]) -> Result<Self> {
        let mut counts = vec![0; dim];
        for &y in observations {
            *counts
                .get_mut(y)
                .ok_or_else(|| Error::InvalidArgument(format!("observation {} is outside 1..={dim}", y + 1)))? += 1;
        }
        Ok(Self(counts))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Empirical pmf `k/n`; all zeros when there is no data.
    pub fn empirical(&self) -> Vec<f64> {
        let n = self.total();
        self.0
            .iter()
            .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect()
    }
}

/// Posterior moment request: `E[Π ν(w)^{extra_w} | data (, T_1 = x)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosteriorQuery {
    pub counts: CountVector,
    pub extra: Vec<u32>,
    pub condition_t1: Option<usize>,
}

fn check_dims(g: &GeneratorMatrix, counts: &CountVector) -> Result<()> {
    if counts.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "counts over {} categories, generator has {}",
            counts.dim(),
            g.dim()
        )));
    }
    Ok(())
}

fn root_of(g: &GeneratorMatrix, condition: Option<usize>) -> Result<Root> {
    match condition {
        Some(x) if x >= g.dim() => Err(Error::InvalidArgument(format!(
            "category {} is outside 1..={}",
            x + 1,
            g.dim()
        ))),
        Some(x) => Ok(Root::Category(x)),
        None => Ok(Root::Stationary),
    }
}

fn rooted(g: &GeneratorMatrix, root: Root, u: &ScaledVector) -> f64 {
    match root {
        Root::Category(x) => u.values[x],
        Root::Stationary => g.mu().as_slice().iter().zip(&u.values).map(|(m, v)| m * v).sum(),
    }
}

/// `num · 2^{num_exp} / (den · 2^{den_exp}) · exp(ln_factor)`.
fn scaled_ratio(num: f64, num_exp: i64, den: f64, den_exp: i64, ln_factor: f64) -> f64 {
    let shift = num_exp - den_exp;
    if shift.abs() < 900 {
        let v = num / den * 2f64.powi(shift as i32) * ln_factor.exp();
        if v.is_normal() || v == 0.0 {
            return v;
        }
    }
    (num.ln() - den.ln() + shift as f64 * std::f64::consts::LN_2 + ln_factor).exp()
}

/// Probability of one particular data sequence with these counts,
/// `P(Y^n = y^n) = E[Π_x ν(x)^{k_x}]`.
pub fn marginal_likelihood(g: &GeneratorMatrix, counts: &CountVector) -> Result<f64> {
    Ok(log_marginal_likelihood(g, counts)?.exp())
}

/// Natural log of [`marginal_likelihood`], finite even when the probability underflows.
pub fn log_marginal_likelihood(g: &GeneratorMatrix, counts: &CountVector) -> Result<f64> {
    check_dims(g, counts)?;
    let n = counts.total();
    if n == 0 {
        return Ok(0.0);
    }
    let query = MomentQuery::singletons(counts.as_slice()).reduced();
    let cache = ResolventCache::new(g, n)?;
    let mut top = None;
    moments::sweep(
        &cache,
        query.sets(),
        query.exponents(),
        n,
        |_| true,
        |level, lv| {
            if level == n {
                top = lv.get(query.exponents());
            }
        },
    );
    let u = top.expect("sweep reaches the data level");
    let mantissa = rooted(g, Root::Stationary, &u);
    Ok(mantissa.ln() + u.exp2 as f64 * std::f64::consts::LN_2 - moments::ln_distinct_permutations(query.exponents()))
}

/// `E[Π_w ν(w)^{l_w} | counts (, T_1 = x)]`.
pub fn posterior_moment(g: &GeneratorMatrix, q: &PosteriorQuery) -> Result<f64> {
    check_dims(g, &q.counts)?;
    if q.extra.len() != g.dim() {
        return Err(Error::Dimension(format!(
            "extra exponents over {} categories, generator has {}",
            q.extra.len(),
            g.dim()
        )));
    }
    let root = root_of(g, q.condition_t1)?;
    let m: u32 = q.extra.iter().sum();
    if m == 0 {
        return Ok(1.0);
    }
    let n = q.counts.total();

    // Work over categories touched by either the data or the extra exponents.
    let support: Vec<usize> = (0..g.dim())
        .filter(|&x| q.counts.as_slice()[x] + q.extra[x] > 0)
        .collect();
    let sets: Vec<Vec<usize>> = support.iter().map(|&x| vec![x]).collect();
    let data: Vec<u32> = support.iter().map(|&x| q.counts.as_slice()[x]).collect();
    let bounds: Vec<u32> = support.iter().map(|&x| q.counts.as_slice()[x] + q.extra[x]).collect();

    let cache = ResolventCache::new(g, n + m)?;
    let (mut base, mut top) = (None, None);
    moments::sweep(
        &cache,
        &sets,
        &bounds,
        n + m,
        |_| true,
        |level, lv| {
            if level == n {
                base = lv.get(&data);
            }
            if level == n + m {
                top = lv.get(&bounds);
            }
        },
    );
    let (base, top) = (base.expect("data level"), top.expect("top level"));

    // ln #S(k⃗) − ln #S(k⃗+l⃗), telescoped
    let ln_ratio: f64 = data
        .iter()
        .zip(&bounds)
        .map(|(&k, &kl)| (k + 1..=kl).map(|t| (t as f64).ln()).sum::<f64>())
        .sum::<f64>()
        - (n + 1..=n + m).map(|t| (t as f64).ln()).sum::<f64>();
    Ok(scaled_ratio(
        rooted(g, root, &top),
        top.exp2,
        rooted(g, root, &base),
        base.exp2,
        ln_ratio,
    ))
}

/// Posterior predictive `p(x | k⃗)` for every category `x`, averaging over `T_1 ~ μ`.
pub fn posterior_mean_pmf(g: &GeneratorMatrix, counts: &CountVector) -> Result<ProbVector> {
    pmf_with_root(g, counts, None)
}

/// Posterior predictive conditioned additionally on `T_1 = x`.
pub fn posterior_mean_pmf_given_t1(g: &GeneratorMatrix, counts: &CountVector, x: usize) -> Result<ProbVector> {
    pmf_with_root(g, counts, Some(x))
}

fn pmf_with_root(g: &GeneratorMatrix, counts: &CountVector, condition: Option<usize>) -> Result<ProbVector> {
    check_dims(g, counts)?;
    let root = root_of(g, condition)?;
    let d = g.dim();
    let n = counts.total();
    let k = counts.as_slice();

    // Nodes l⃗ ≤ k⃗ + e_x for some x: every coordinate within the data except
    // possibly one that exceeds it by a single unit.
    let sets: Vec<Vec<usize>> = (0..d).map(|x| vec![x]).collect();
    let bounds: Vec<u32> = k.iter().map(|c| c + 1).collect();
    let admissible = |l: &[u32]| l.iter().zip(k).filter(|(a, b)| a > b).count() <= 1;

    let cache = ResolventCache::new(g, n + 1)?;
    let mut base = None;
    let mut numerators: Vec<Option<ScaledVector>> = vec![None; d];
    let mut key = k.to_vec();
    moments::sweep(&cache, &sets, &bounds, n + 1, admissible, |level, lv| {
        if level == n {
            base = lv.get(k);
        } else if level == n + 1 {
            for (x, slot) in numerators.iter_mut().enumerate() {
                key[x] += 1;
                *slot = lv.get(&key);
                key[x] -= 1;
            }
        }
    });
    let base = base.expect("data level");
    let den = rooted(g, root, &base);
    let pmf = numerators
        .into_iter()
        .enumerate()
        .map(|(x, u)| {
            let u = u.expect("every one-step extension is admissible");
            // #S(k⃗)/#S(k⃗+e_x) = (k_x+1)/(n+1)
            let ln_ratio = ((k[x] + 1) as f64 / (n + 1) as f64).ln();
            scaled_ratio(rooted(g, root, &u), u.exp2, den, base.exp2, ln_ratio)
        })
        .collect();
    ProbVector::with_tolerance(pmf, PMF_SUM_TOLERANCE)
}
