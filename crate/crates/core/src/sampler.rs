//! Monte Carlo sampling of Markovian stick-breaking measures.
//!
//! A draw pairs GEM(θ) stick weights with a stationary Markov chain run under
//! `Q = I + G/θ`. Sticks are broken until the unbroken remainder falls below
//! `eps`; that remainder is placed on one extra atom at the next chain state,
//! so every measure carries total mass one with total-variation bias at most
//! `eps`.
//!
//! Randomness comes from [`RngStream`], a xoshiro256++ generator. Monte Carlo
//! replicate `r` always uses the stream derived from `(seed, r)`, so estimates
//! are bit-identical for a given seed no matter how work is split across
//! threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::moments::MomentQuery;
use crate::numerics::{DenseMatrix, ProbVector};

/// Default truncation threshold for stick breaking.
pub const DEFAULT_EPS: f64 = 1e-12;

/// Replicates per parallel work unit; fixed so the reduction order never
/// depends on the thread pool.
const CHUNK: u64 = 4096;

/// Deterministic xoshiro256++ stream seeded from a 64-bit seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Independent stream for replicate `index` under `seed`.
    pub fn derive(seed: u64, index: u64) -> Self {
        let mixed = splitmix64(seed ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        Self {
            seed: mixed,
            inner: Xoshiro256PlusPlus::seed_from_u64(mixed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// GEM weights `P_1..P_m` and the unbroken remainder `Π (1 − X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GemSticks {
    pub weights: Vec<f64>,
    pub residual: f64,
}

/// Breaks sticks with `X ~ Beta(1, θ)` drawn as `1 − U^{1/θ}` until the
/// remainder drops below `eps`.
pub fn sample_gem<R: Rng + ?Sized>(theta: f64, eps: f64, rng: &mut R) -> Result<GemSticks> {
    check_gem_args(theta, eps)?;
    let mut weights = Vec::new();
    let residual = break_sticks(1.0 / theta, eps, rng, |w| weights.push(w));
    Ok(GemSticks { weights, residual })
}

fn check_gem_args(theta: f64, eps: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn break_sticks<R: Rng + ?Sized>(inv_theta: f64, eps: f64, rng: &mut R, mut emit: impl FnMut(f64)) -> f64 {
    let mut remaining = 1.0;
    while remaining >= eps {
        let u: f64 = rng.random();
        let x = 1.0 - u.powf(inv_theta);
        emit(x * remaining);
        remaining *= 1.0 - x;
    }
    remaining
}

/// Cumulative tables for drawing a stationary chain.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    start: Vec<f64>,
    rows: Vec<Vec<f64>>,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn draw_index(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("nonempty distribution");
    cdf.partition_point(|&c| c <= u * total).min(cdf.len() - 1)
}

impl ChainSampler {
    pub fn new(q: &DenseMatrix, mu: &ProbVector) -> Result<Self> {
        if q.dim() != mu.dim() {
            return Err(Error::Dimension(format!(
                "kernel {} vs distribution {}",
                q.dim(),
                mu.dim()
            )));
        }
        for (i, s) in q.row_sums().into_iter().enumerate() {
            if (s - 1.0).abs() > 1e-10 || q.row(i).iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "row {} of the kernel is not stochastic",
                    i + 1
                )));
            }
        }
        Ok(Self {
            start: cumulative(mu.as_slice()),
            rows: (0..q.dim()).map(|i| cumulative(q.row(i))).collect(),
        })
    }

    pub fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw_index(&self.start, rng.random())
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        draw_index(&self.rows[from], rng.random())
    }
}

/// Stationary chain `T_1 ~ μ`, `T_{j+1} ~ Q[T_j, ·]`.
pub fn sample_chain<R: Rng + ?Sized>(
    q: &DenseMatrix,
    mu: &ProbVector,
    length: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let chain = ChainSampler::new(q, mu)?;
    let mut out = Vec::with_capacity(length);
    if length > 0 {
        let mut t = chain.initial(rng);
        out.push(t);
        for _ in 1..length {
            t = chain.step(t, rng);
            out.push(t);
        }
    }
    Ok(out)
}

/// Finite-atom draw `Σ P_j δ_{T_j}` plus the tail mass on `residual_state`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMeasure {
    pub atoms: Vec<(usize, f64)>,
    pub residual: f64,
    pub residual_state: usize,
    pub first_state: usize,
}

impl TruncatedMeasure {
    /// Mass per category, tail atom included.
    pub fn masses(&self, dim: usize) -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for &(t, p) in &self.atoms {
            m[t] += p;
        }
        m[self.residual_state] += self.residual;
        m
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.residual
    }
}

/// Reusable sampler for MSB draws under a fixed generator and `θ`.
#[derive(Debug, Clone)]
pub struct MsbSampler {
    dim: usize,
    inv_theta: f64,
    eps: f64,
    chain: ChainSampler,
}

impl MsbSampler {
    pub fn new(g: &GeneratorMatrix, theta: f64, eps: f64) -> Result<Self> {
        check_gem_args(theta, eps)?;
        let q = g.to_transition_kernel(theta)?;
        Ok(Self {
            dim: g.dim(),
            inv_theta: 1.0 / theta,
            eps,
            chain: ChainSampler::new(&q, g.mu())?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One draw; `start` fixes `T_1` instead of drawing it from `μ`.
    pub fn draw<R: Rng + ?Sized>(&self, start: Option<usize>, rng: &mut R) -> TruncatedMeasure {
        let first = start.unwrap_or_else(|| self.chain.initial(rng));
        let mut atoms = Vec::new();
        let mut remaining = 1.0;
        let mut state = first;
        while remaining >= self.eps {
            let u: f64 = rng.random();
            let x = 1.0 - u.powf(self.inv_theta);
            atoms.push((state, x * remaining));
            remaining *= 1.0 - x;
            if remaining >= self.eps {
                state = self.chain.step(state, rng);
            }
        }
        if !atoms.is_empty() {
            state = self.chain.step(state, rng);
        }
        TruncatedMeasure {
            atoms,
            residual: remaining,
            residual_state: state,
            first_state: first,
        }
    }

    /// Category masses of one draw accumulated into `masses` (zeroed first),
    /// consuming randomness in the same order as [`MsbSampler::draw`].
    pub fn draw_masses<R: Rng + ?Sized>(&self, start: Option<usize>, rng: &mut R, masses: &mut [f64]) {
        masses.iter_mut().for_each(|m| *m = 0.0);
        let first = start.unwrap_or_else(|| self.chain.initial(rng));
        let mut remaining = 1.0;
        let mut state = first;
        let mut broke = false;
        while remaining >= self.eps {
            let u: f64 = rng.random();
            let x = 1.0 - u.powf(self.inv_theta);
            masses[state] += x * remaining;
            remaining *= 1.0 - x;
            broke = true;
            if remaining >= self.eps {
                state = self.chain.step(state, rng);
            }
        }
        if broke {
            state = self.chain.step(state, rng);
        }
        masses[state] += remaining;
    }
}

/// One MSB draw with `T_1 ~ μ`.
pub fn sample_msb<R: Rng + ?Sized>(g: &GeneratorMatrix, theta: f64, eps: f64, rng: &mut R) -> Result<TruncatedMeasure> {
    Ok(MsbSampler::new(g, theta, eps)?.draw(None, rng))
}

/// `n` i.i.d. observations from a drawn measure: pick atom `j` with
/// probability `P_j` (tail atom included) and report its state.
pub fn sample_data<R: Rng + ?Sized>(measure: &TruncatedMeasure, n: usize, rng: &mut R) -> Vec<usize> {
    let mut weights: Vec<f64> = measure.atoms.iter().map(|a| a.1).collect();
    weights.push(measure.residual);
    let cdf = cumulative(&weights);
    (0..n)
        .map(|_| {
            let j = draw_index(&cdf, rng.random());
            measure.atoms.get(j).map_or(measure.residual_state, |a| a.0)
        })
        .collect()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Runs `replicates` independent evaluations of `f`, each with its own
/// derived stream, and returns the compensated column sums of the `width`
/// values each evaluation writes.
fn replicate_sums<F>(replicates: u64, seed: u64, width: usize, f: F) -> Vec<f64>
where
    F: Fn(&mut RngStream, &mut [f64]) + Sync,
{
    let chunks = replicates.div_ceil(CHUNK);
    let partials: Vec<Vec<CompensatedSum>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![CompensatedSum::default(); width];
            let mut out = vec![0.0; width];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicates) {
                let mut rng = RngStream::derive(seed, r);
                out.iter_mut().for_each(|o| *o = 0.0);
                f(&mut rng, &mut out);
                for (a, &o) in acc.iter_mut().zip(&out) {
                    a.add(o);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![CompensatedSum::default(); width];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.add(p.sum);
            t.add(p.carry);
        }
    }
    total.iter().map(CompensatedSum::value).collect()
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// Distance from `value` in standard errors (infinite when the SE is zero
    /// and the values differ).
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.estimate - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }
}

/// Monte Carlo estimate of `E[Π ν(A_i)^{k_i} (| T_1 = x)]` from `samples`
/// independent draws. Conditioning starts the chain at `x`.
pub fn mc_moment_estimate(
    g: &GeneratorMatrix,
    theta: f64,
    query: &MomentQuery,
    samples: u64,
    eps: f64,
    seed: u64,
    condition_t1: Option<usize>,
) -> Result<McEstimate> {
    let mut v = mc_moment_estimates(g, theta, std::slice::from_ref(query), samples, eps, seed, condition_t1)?;
    Ok(v.remove(0))
}

/// Several moments estimated from one shared set of draws (estimates are
/// therefore correlated with each other).
pub fn mc_moment_estimates(
    g: &GeneratorMatrix,
    theta: f64,
    queries: &[MomentQuery],
    samples: u64,
    eps: f64,
    seed: u64,
    condition_t1: Option<usize>,
) -> Result<Vec<McEstimate>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("at least two samples are needed".into()));
    }
    if let Some(q) = queries.iter().find(|q| q.dim() != g.dim()) {
        return Err(Error::Dimension(format!(
            "query over {} categories, generator has {}",
            q.dim(),
            g.dim()
        )));
    }
    if let Some(x) = condition_t1 {
        if x >= g.dim() {
            return Err(Error::InvalidArgument(format!(
                "category {} is outside 1..={}",
                x + 1,
                g.dim()
            )));
        }
    }
    let sampler = MsbSampler::new(g, theta, eps)?;
    let reduced: Vec<MomentQuery> = queries.iter().map(MomentQuery::reduced).collect();
    let d = g.dim();
    let sums = replicate_sums(samples, seed, 2 * reduced.len(), |rng, out| {
        let mut masses = vec![0.0; d];
        sampler.draw_masses(condition_t1, rng, &mut masses);
        for (i, q) in reduced.iter().enumerate() {
            let value: f64 = q
                .sets()
                .iter()
                .zip(q.exponents())
                .map(|(set, &k)| set.iter().map(|&a| masses[a]).sum::<f64>().powi(k as i32))
                .product();
            out[2 * i] = value;
            out[2 * i + 1] = value * value;
        }
    });
    let n = samples as f64;
    Ok(reduced
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if q.total() == 0 {
                return McEstimate {
                    estimate: 1.0,
                    std_error: 0.0,
                    samples,
                };
            }
            let mean = sums[2 * i] / n;
            let var = ((sums[2 * i + 1] - n * mean * mean) / (n - 1.0)).max(0.0);
            McEstimate {
                estimate: mean,
                std_error: (var / n).sqrt(),
                samples,
            }
        })
        .collect())
}

/// Counts draws whose category masses fall within sup-norm `eps_ball` of each target.
pub fn support_coverage(
    g: &GeneratorMatrix,
    theta: f64,
    targets: &[ProbVector],
    eps_ball: f64,
    samples: u64,
    seed: u64,
) -> Result<Vec<u64>> {
    if !(eps_ball > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps_ball must be positive, got {eps_ball}"
        )));
    }
    if let Some(t) = targets.iter().find(|t| t.dim() != g.dim()) {
        return Err(Error::Dimension(format!(
            "target of dimension {}, generator has {}",
            t.dim(),
            g.dim()
        )));
    }
    let sampler = MsbSampler::new(g, theta, DEFAULT_EPS)?;
    let d = g.dim();
    let sums = replicate_sums(samples, seed, targets.len(), |rng, out| {
        let mut masses = vec![0.0; d];
        sampler.draw_masses(None, rng, &mut masses);
        for (o, t) in out.iter_mut().zip(targets) {
            let dist = masses
                .iter()
                .zip(t.as_slice())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if dist <= eps_ball {
                *o = 1.0;
            }
        }
    });
    Ok(sums.into_iter().map(|s| s.round() as u64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{tridiagonal, wrapped_tridiagonal};

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| RngStream::derive(7, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(RngStream::derive(7, 3).next_u64(), RngStream::derive(7, 4).next_u64());
        assert_ne!(RngStream::derive(7, 3).next_u64(), RngStream::derive(8, 3).next_u64());
    }

    #[test]
    fn first_stick_has_beta_mean() {
        let theta = 2.0;
        let n = 100_000u64;
        let sums = replicate_sums(n, 11, 2, |rng, out| {
            let p1 = sample_gem(theta, DEFAULT_EPS, rng).unwrap().weights[0];
            out[0] = p1;
            out[1] = p1 * p1;
        });
        let mean = sums[0] / n as f64;
        let se = ((sums[1] / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0 / (1.0 + theta)).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn small_theta_concentrates_on_first_stick() {
        let mut rng = RngStream::new(5);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| sample_gem(0.01, DEFAULT_EPS, &mut rng).unwrap().weights[0])
            .sum();
        assert!(total / n as f64 > 0.95);
    }

    #[test]
    fn gem_conserves_mass() {
        let mut rng = RngStream::new(1);
        for &theta in &[0.1, 1.0, 10.0] {
            let s = sample_gem(theta, 1e-9, &mut rng).unwrap();
            assert!(s.residual < 1e-9);
            assert!((s.weights.iter().sum::<f64>() + s.residual - 1.0).abs() < 1e-12);
        }
        assert!(sample_gem(0.0, 1e-9, &mut rng).is_err());
        assert!(sample_gem(1.0, 1.5, &mut rng).is_err());
    }

    #[test]
    fn chain_is_stationary() {
        let g = wrapped_tridiagonal(5, 1.0).unwrap();
        let q = g.to_transition_kernel(g.theta_g()).unwrap();
        let mut rng = RngStream::new(9);
        let reps = 40_000;
        let mut counts = [0usize; 5];
        for _ in 0..reps {
            let path = sample_chain(&q, g.mu(), 4, &mut rng).unwrap();
            counts[path[3]] += 1;
        }
        for (x, &c) in counts.iter().enumerate() {
            let p = g.mu()[x];
            let se = (p * (1.0 - p) / reps as f64).sqrt();
            assert!((c as f64 / reps as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn draws_agree_and_conserve_mass() {
        let g = tridiagonal(6, 2.0).unwrap();
        let s = MsbSampler::new(&g, 5.0, 1e-10).unwrap();
        let a = s.draw(Some(2), &mut RngStream::new(3));
        let mut m = vec![0.0; 6];
        s.draw_masses(Some(2), &mut RngStream::new(3), &mut m);
        assert_eq!(a.masses(6), m);
        assert_eq!(a.first_state, 2);
        assert_eq!(a.atoms[0].0, 2);
        assert!((a.total_mass() - 1.0).abs() < 1e-12);
        assert!(a.residual < 1e-10);
    }

    #[test]
    fn data_lands_on_atoms() {
        let m = TruncatedMeasure {
            atoms: vec![(1, 0.5), (3, 0.5)],
            residual: 0.0,
            residual_state: 0,
            first_state: 1,
        };
        let data = sample_data(&m, 1000, &mut RngStream::new(2));
        assert!(data.iter().all(|&x| x == 1 || x == 3));
        assert!(data.contains(&1) && data.contains(&3));
    }

    #[test]
    fn estimates_are_deterministic_and_trivial_query_is_exact() {
        let g = tridiagonal(4, 1.0).unwrap();
        let q = MomentQuery::singletons(&[1, 0, 2, 0]);
        let a = mc_moment_estimate(&g, g.theta_g(), &q, 10_000, DEFAULT_EPS, 42, None).unwrap();
        let b = mc_moment_estimate(&g, g.theta_g(), &q, 10_000, DEFAULT_EPS, 42, None).unwrap();
        assert_eq!(a, b);
        let zero = MomentQuery::singletons(&[0, 0, 0, 0]);
        let z = mc_moment_estimate(&g, g.theta_g(), &zero, 100, DEFAULT_EPS, 1, None).unwrap();
        assert_eq!((z.estimate, z.std_error), (1.0, 0.0));
    }

    #[test]
    fn unit_ball_covers_everything() {
        let g = tridiagonal(3, 1.0).unwrap();
        let t = vec![ProbVector::uniform(3)];
        assert_eq!(support_coverage(&g, 2.0, &t, 1.0, 500, 4).unwrap(), vec![500]);
    }
}
