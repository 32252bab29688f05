//! Exact prior moments of the Markovian stick-breaking measure.
//!
//! For disjoint sets `A_1..A_n` and exponents `k⃗` with total `k`,
//!
//! ```text
//! E[Π ν(A_i)^{k_i} | T_1 = x] = #S(k⃗)^{-1} Σ_σ e_xᵀ R_k D(A_σk) ⋯ R_1 D(A_σ1) 1
//! ```
//!
//! where `R_j = (I − G/j)^{-1}` and σ ranges over the distinct orderings of
//! the multiset with `k_i` copies of label `i`. Writing `U(l⃗)` for the sum
//! over orderings of a sub-multiset `l⃗ ≤ k⃗`, the sum factors through the last
//! label applied:
//!
//! ```text
//! U(0) = 1,    U(l⃗) = R_{|l⃗|} Σ_{i : l_i ≥ 1} D(A_i) U(l⃗ − e_i)
//! ```
//!
//! [`sweep`] evaluates this level by level, holding two levels at a time.
//! Three independent routes are kept for cross-checking: the literal sum over
//! orderings ([`moment_bruteforce`]), the one-set product
//! ([`single_set_moment`]), and the first-step recursion in the GEM
//! concentration `θ` ([`moment_via_theta_recursion`]).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::numerics::{self, DenseMatrix};

/// Default cap on the number of orderings enumerated by the brute-force path.
pub const DEFAULT_BRUTE_CAP: u128 = 1_000_000;

/// Largest allowed spread of log-coefficients in the θ-recursion.
pub const LOG_SPREAD_LIMIT: f64 = 700.0;

/// Levels are rescaled by a power of two once their largest entry leaves
/// `[2^-RESCALE_BITS, 2^RESCALE_BITS]`.
const RESCALE_BITS: i32 = 256;

/// Where the chain of resolvents is rooted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    /// Condition on `T_1 = x`.
    Category(usize),
    /// Average over `T_1 ~ μ`.
    Stationary,
}

/// Disjoint category sets with nonnegative integer exponents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentQuery {
    dim: usize,
    sets: Vec<Vec<usize>>,
    exponents: Vec<u32>,
}

impl MomentQuery {
    /// Categories are 0-based. Members are sorted and deduplicated.
    pub fn new(dim: usize, sets: Vec<Vec<usize>>, exponents: Vec<u32>) -> Result<Self> {
        if sets.len() != exponents.len() {
            return Err(Error::Dimension(format!(
                "{} sets but {} exponents",
                sets.len(),
                exponents.len()
            )));
        }
        let mut owner = vec![usize::MAX; dim];
        let mut clean = Vec::with_capacity(sets.len());
        for (i, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            for &x in &set {
                if x >= dim {
                    return Err(Error::InvalidArgument(format!(
                        "category {} is outside 1..={dim}",
                        x + 1
                    )));
                }
                if owner[x] != usize::MAX {
                    return Err(Error::OverlappingSets {
                        first: owner[x] + 1,
                        second: i + 1,
                    });
                }
                owner[x] = i;
            }
            clean.push(set);
        }
        Ok(Self {
            dim,
            sets: clean,
            exponents,
        })
    }

    /// One singleton set per category carrying that category's count.
    pub fn singletons(counts: &[u32]) -> Self {
        Self {
            dim: counts.len(),
            sets: (0..counts.len()).map(|x| vec![x]).collect(),
            exponents: counts.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn total(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Drops every set whose exponent is zero.
    pub fn reduced(&self) -> Self {
        let (sets, exponents) = self
            .sets
            .iter()
            .zip(&self.exponents)
            .filter(|(_, &k)| k > 0)
            .map(|(s, &k)| (s.clone(), k))
            .unzip();
        Self {
            dim: self.dim,
            sets,
            exponents,
        }
    }
}

/// `R_j = (I − G/j)^{-1}` for `j = 1..=k_max`, computed once per generator.
#[derive(Debug, Clone)]
pub struct ResolventCache<'g> {
    generator: &'g GeneratorMatrix,
    resolvents: Vec<DenseMatrix>,
}

impl<'g> ResolventCache<'g> {
    pub fn new(generator: &'g GeneratorMatrix, k_max: u32) -> Result<Self> {
        let resolvents = (1..=k_max)
            .into_par_iter()
            .map(|j| numerics::resolvent(generator.matrix(), j as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { generator, resolvents })
    }

    pub fn generator(&self) -> &'g GeneratorMatrix {
        self.generator
    }

    pub fn k_max(&self) -> u32 {
        self.resolvents.len() as u32
    }

    /// Grows the cache so that `R_k` is available.
    pub fn extend_to(&mut self, k: u32) -> Result<()> {
        let have = self.k_max();
        if k > have {
            let more = (have + 1..=k)
                .into_par_iter()
                .map(|j| numerics::resolvent(self.generator.matrix(), j as f64))
                .collect::<Result<Vec<_>>>()?;
            self.resolvents.extend(more);
        }
        Ok(())
    }

    /// `R_j`, 1-based.
    pub fn get(&self, j: u32) -> &DenseMatrix {
        &self.resolvents[j as usize - 1]
    }

    fn require(&self, k: u32) -> Result<()> {
        if k > self.k_max() {
            return Err(Error::InvalidArgument(format!(
                "resolvent cache holds {} levels, {k} needed",
                self.k_max()
            )));
        }
        Ok(())
    }

    fn root_value(&self, root: Root, v: &[f64]) -> f64 {
        match root {
            Root::Category(x) => v[x],
            Root::Stationary => self.generator.mu().as_slice().iter().zip(v).map(|(m, u)| m * u).sum(),
        }
    }

    /// `E[Π ν(A_i)^{k_i} | root]` via the lattice sweep.
    pub fn moment(&self, query: &MomentQuery, root: Root) -> Result<f64> {
        check_root(root, self.generator.dim())?;
        let q = query.reduced();
        let k = q.total();
        if k == 0 {
            return Ok(1.0);
        }
        self.require(k)?;
        let mut top = None;
        sweep(
            self,
            q.sets(),
            q.exponents(),
            k,
            |_| true,
            |level, lv| {
                if level == k {
                    top = lv.get(q.exponents());
                }
            },
        );
        let u = top.expect("sweep reaches the top level");
        Ok(normalize(self.root_value(root, &u.values), u.exp2, q.exponents()))
    }

    /// `e_xᵀ Π_j (R_j D(A)) 1` for a single set.
    pub fn single_set(&self, set: &[usize], k: u32, x: usize) -> Result<f64> {
        check_root(Root::Category(x), self.generator.dim())?;
        self.require(k)?;
        Ok(self.single_set_vector(set, k)[x])
    }

    fn single_set_vector(&self, set: &[usize], k: u32) -> Vec<f64> {
        let d = self.generator.dim();
        let mut v = vec![1.0; d];
        let mut masked = vec![0.0; d];
        for j in 1..=k {
            masked.iter_mut().for_each(|m| *m = 0.0);
            for &a in set {
                masked[a] = v[a];
            }
            self.get(j).mul_vec_into(&masked, &mut v);
        }
        v
    }

    /// Literal sum over all distinct orderings.
    pub fn bruteforce(&self, query: &MomentQuery, root: Root, cap: u128) -> Result<f64> {
        check_root(root, self.generator.dim())?;
        let q = query.reduced();
        let k = q.total();
        if k == 0 {
            return Ok(1.0);
        }
        let count = count_distinct_permutations(q.exponents())?;
        if count > cap {
            return Err(Error::PermutationCap { count, cap });
        }
        self.require(k)?;
        let d = self.generator.dim();
        let mut labels: Vec<usize> = q
            .exponents()
            .iter()
            .enumerate()
            .flat_map(|(i, &e)| std::iter::repeat_n(i, e as usize))
            .collect();
        let mut total = 0.0;
        let mut w = vec![0.0; d];
        let mut masked = vec![0.0; d];
        loop {
            w.iter_mut().for_each(|v| *v = 1.0);
            for (j, &label) in labels.iter().enumerate() {
                masked.iter_mut().for_each(|m| *m = 0.0);
                for &a in &q.sets()[label] {
                    masked[a] = w[a];
                }
                self.get(j as u32 + 1).mul_vec_into(&masked, &mut w);
            }
            total += self.root_value(root, &w);
            if !next_permutation(&mut labels) {
                break;
            }
        }
        Ok(total / count as f64)
    }
}

fn check_root(root: Root, dim: usize) -> Result<()> {
    match root {
        Root::Category(x) if x >= dim => Err(Error::InvalidArgument(format!(
            "category {} is outside 1..={dim}",
            x + 1
        ))),
        _ => Ok(()),
    }
}

/// `mantissa · 2^exp2 / #S(k⃗)`; divides exactly while the count fits in 53 bits.
pub(crate) fn normalize(mantissa: f64, exp2: i64, exponents: &[u32]) -> f64 {
    if mantissa <= 0.0 {
        return 0.0;
    }
    if let Ok(count) = count_distinct_permutations(exponents) {
        if count < (1u128 << 53) && exp2.abs() < 900 {
            let v = mantissa / count as f64 * 2f64.powi(exp2 as i32);
            if v.is_normal() {
                return v;
            }
        }
    }
    (mantissa.ln() + exp2 as f64 * std::f64::consts::LN_2 - ln_distinct_permutations(exponents)).exp()
}

/// Unnormalized orderings sum `U(l⃗)`, stored as `values · 2^exp2`.
#[derive(Debug, Clone)]
pub struct ScaledVector {
    pub values: Vec<f64>,
    pub exp2: i64,
}

/// All lattice nodes of one level, sharing a power-of-two scale.
#[derive(Debug)]
pub struct Level {
    keys: Vec<Vec<u32>>,
    vectors: Vec<Vec<f64>>,
    index: HashMap<Vec<u32>, usize>,
    exp2: i64,
}

impl Level {
    fn root() -> Self {
        Self {
            keys: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            exp2: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[Vec<u32>] {
        &self.keys
    }

    pub fn exp2(&self) -> i64 {
        self.exp2
    }

    /// Vector stored for `key`, if that node is in this level.
    pub fn get(&self, key: &[u32]) -> Option<ScaledVector> {
        self.index.get(key).map(|&i| ScaledVector {
            values: self.vectors[i].clone(),
            exp2: self.exp2,
        })
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }
}

/// Level-synchronous evaluation of `U(l⃗)` for all admissible `l⃗ ≤ bounds`
/// with `|l⃗| ≤ top`. `visit(j, level)` is called once per level, including
/// level 0. Only admissible nodes are created; the admissible set must be
/// closed under decrementing a coordinate.
pub fn sweep<F, V>(
    cache: &ResolventCache<'_>,
    sets: &[Vec<usize>],
    bounds: &[u32],
    top: u32,
    admissible: F,
    mut visit: V,
) where
    F: Fn(&[u32]) -> bool,
    V: FnMut(u32, &Level),
{
    assert_eq!(sets.len(), bounds.len());
    assert!(top <= cache.k_max(), "resolvent cache too small for sweep");
    let d = cache.generator().dim();
    let n = sets.len();

    let mut level = Level::root();
    level.keys.push(vec![0; n]);
    level.vectors.push(vec![1.0; d]);
    level.index.insert(vec![0; n], 0);
    visit(0, &level);

    for j in 1..=top {
        let mut next = Level::root();
        next.exp2 = level.exp2;
        for (key, u) in level.keys.iter().zip(&level.vectors) {
            for (i, set) in sets.iter().enumerate() {
                if key[i] >= bounds[i] {
                    continue;
                }
                let mut child = key.clone();
                child[i] += 1;
                if !admissible(&child) {
                    continue;
                }
                let slot = match next.index.get(&child) {
                    Some(&s) => s,
                    None => {
                        let s = next.keys.len();
                        next.index.insert(child.clone(), s);
                        next.keys.push(child);
                        next.vectors.push(vec![0.0; d]);
                        s
                    }
                };
                let acc = &mut next.vectors[slot];
                for &a in set {
                    acc[a] += u[a];
                }
            }
        }
        let r = cache.get(j);
        next.vectors.par_iter_mut().for_each(|acc| {
            let masked = std::mem::take(acc);
            *acc = r.mul_vec(&masked);
        });
        rescale(&mut next);
        visit(j, &next);
        level = next;
        if level.is_empty() {
            break;
        }
    }
}

fn rescale(level: &mut Level) {
    let max = level.vectors.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 || !max.is_finite() {
        return;
    }
    let e = max.log2().floor() as i32;
    if e.abs() <= RESCALE_BITS {
        return;
    }
    let factor = 2f64.powi(-e);
    for v in level.vectors.iter_mut().flatten() {
        *v *= factor;
    }
    level.exp2 += e as i64;
}

/// Multinomial coefficient `k! / Π k_i!`, exact.
pub fn count_distinct_permutations(exponents: &[u32]) -> Result<u128> {
    let mut result: u128 = 1;
    let mut running: u128 = 0;
    for &k in exponents {
        for t in 1..=k as u128 {
            running += 1;
            result = result.checked_mul(running).ok_or(Error::Overflow)? / t;
        }
    }
    Ok(result)
}

/// `ln(k!)` as a sum of logarithms.
pub fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|m| (m as f64).ln()).sum()
}

/// `ln #S(k⃗)`, usable far beyond the range of [`count_distinct_permutations`].
pub fn ln_distinct_permutations(exponents: &[u32]) -> f64 {
    match count_distinct_permutations(exponents) {
        Ok(c) if c < (1u128 << 52) => (c as f64).ln(),
        _ => {
            let k: u32 = exponents.iter().sum();
            ln_factorial(k) - exponents.iter().map(|&e| ln_factorial(e)).sum::<f64>()
        }
    }
}

/// Advances to the next lexicographic permutation; false after the last one.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `E[Π ν(A_i)^{k_i} | T_1 = x]`.
pub fn moment_conditional(g: &GeneratorMatrix, query: &MomentQuery, x: usize) -> Result<f64> {
    check_query(g, query)?;
    ResolventCache::new(g, query.total())?.moment(query, Root::Category(x))
}

/// `E[Π ν(A_i)^{k_i}]` with `T_1` drawn from the stationary distribution.
pub fn moment_unconditional(g: &GeneratorMatrix, query: &MomentQuery) -> Result<f64> {
    check_query(g, query)?;
    ResolventCache::new(g, query.total())?.moment(query, Root::Stationary)
}

/// `E[ν(A)^k | T_1 = x]` as a product of `k` resolvent-projection factors.
pub fn single_set_moment(g: &GeneratorMatrix, set: &[usize], k: u32, x: usize) -> Result<f64> {
    if let Some(&bad) = set.iter().find(|&&a| a >= g.dim()) {
        return Err(Error::InvalidArgument(format!(
            "category {} is outside 1..={}",
            bad + 1,
            g.dim()
        )));
    }
    ResolventCache::new(g, k)?.single_set(set, k, x)
}

/// Brute-force oracle over all `#S(k⃗)` orderings; refuses more than `cap`.
pub fn moment_bruteforce(g: &GeneratorMatrix, query: &MomentQuery, root: Root, cap: u128) -> Result<f64> {
    check_query(g, query)?;
    ResolventCache::new(g, query.total())?.bruteforce(query, root, cap)
}

fn check_query(g: &GeneratorMatrix, query: &MomentQuery) -> Result<()> {
    if query.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "query over {} categories, generator has {}",
            query.dim(),
            g.dim()
        )));
    }
    Ok(())
}

/// Moment from the first-step recursion in `θ`:
///
/// ```text
/// v(k⃗) = R_k Σ_i [θ Γ(k_i+1) / (k Γ(θ+k))] D(A_i) Q Σ_{l<k_i} [Γ(θ+k−k_i+l) / Γ(l+1)] v(k⃗ + (l−k_i) e_i)
/// ```
///
/// with `Q = I + G/θ` and `v(0) = 1`. The result does not depend on `θ`, which
/// makes this an independent check of [`moment_conditional`].
pub fn moment_via_theta_recursion(g: &GeneratorMatrix, theta: f64, query: &MomentQuery, root: Root) -> Result<f64> {
    check_query(g, query)?;
    check_root(root, g.dim())?;
    let q_kernel = g.to_transition_kernel(theta)?;
    let q = query.reduced();
    let bounds = q.exponents().to_vec();
    let k = q.total();
    if k == 0 {
        return Ok(1.0);
    }
    let cache = ResolventCache::new(g, k)?;
    let d = g.dim();
    let n = bounds.len();

    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * (bounds[i - 1] as usize + 1);
    }
    let size = strides[n - 1] * (bounds[n - 1] as usize + 1);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(size);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let ln_theta = theta.ln();

    // Decrementing a coordinate lowers the mixed-radix index, so a single
    // increasing pass sees every predecessor first.
    for idx in 0..size {
        let node: Vec<u32> = (0..n)
            .map(|i| ((idx / strides[i]) % (bounds[i] as usize + 1)) as u32)
            .collect();
        let total: u32 = node.iter().sum();
        if total == 0 {
            values.push(vec![1.0; d]);
            continue;
        }
        let mut acc = vec![0.0; d];
        for i in 0..n {
            let ki = node[i];
            if ki == 0 {
                continue;
            }
            let mut inner = vec![0.0; d];
            for l in 0..ki {
                // ln[θ Γ(k_i+1) Γ(θ+k−k_i+l) / (k Γ(θ+k) Γ(l+1))], Gamma ratios telescoped
                let ln_coef = ln_theta - (total as f64).ln() + (l + 1..=ki).map(|t| (t as f64).ln()).sum::<f64>()
                    - (total - ki + l..total).map(|t| (theta + t as f64).ln()).sum::<f64>();
                lo = lo.min(ln_coef);
                hi = hi.max(ln_coef);
                let coef = ln_coef.exp();
                let pred = idx - (ki - l) as usize * strides[i];
                for (s, v) in inner.iter_mut().zip(&values[pred]) {
                    *s += coef * v;
                }
            }
            let moved = q_kernel.mul_vec(&inner);
            for &a in &q.sets()[i] {
                acc[a] += moved[a];
            }
        }
        values.push(cache.get(total).mul_vec(&acc));
    }
    if hi - lo > LOG_SPREAD_LIMIT {
        return Err(Error::PrecisionLoss {
            spread: hi - lo,
            limit: LOG_SPREAD_LIMIT,
        });
    }
    Ok(cache.root_value(root, &values[size - 1]))
}
