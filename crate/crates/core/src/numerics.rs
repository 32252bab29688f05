//! Dense small-matrix linear algebra.
//!
//! Everything here works on row-major `d × d` storage with `d` at most a few
//! hundred. Row index is the source state, column index the target state.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Negative resolvent entries down to this magnitude are rounding noise.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Square dense matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from rows, rejecting ragged or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {dim}",
                    i + 1,
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite entry at ({},{})", i + 1, j + 1)));
                }
                data.push(v);
            }
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    /// `self · v`
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(v, &mut out);
        out
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `vᵀ · self`
    pub fn vec_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries((0..self.dim).map(|i| self.row(i))).finish()
    }
}

/// Probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(entries: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(entries, Self::SUM_TOLERANCE)
    }

    /// Validates with a caller-chosen tolerance on the total mass.
    pub fn with_tolerance(entries: Vec<f64>, tol: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numerical(format!(
                "probability entry {} is {}",
                i + 1,
                entries[i]
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::Numerical(format!("probability vector sums to {sum}")));
        }
        Ok(Self(entries))
    }

    pub fn uniform(dim: usize) -> Self {
        Self(vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// LU factorization with partial pivoting, `P·A = L·U` packed in place.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let d = a.dim();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        let scale = a
            .as_slice()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for k in 0..d {
            let (p, pivot) =
                (k..d)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= scale * f64::EPSILON * d as f64 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..d {
                    lu.data.swap(k * d + j, p * d + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..d {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in k + 1..d {
                        lu.data[i * d + j] -= factor * lu.data[k * d + j];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.lu.dim();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..d {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..d).rev() {
            let s: f64 = (i + 1..d).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let d = self.lu.dim();
        let mut inv = DenseMatrix::zeros(d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Resolvent `(I − G/j)^{-1}` of a generator, returned as a stochastic matrix.
///
/// Negative entries no larger than [`CLAMP_TOLERANCE`] in magnitude are set to
/// zero; anything more negative is reported as a numerical failure.
pub fn resolvent(generator: &DenseMatrix, j: f64) -> Result<DenseMatrix> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "resolvent index must be positive, got {j}"
        )));
    }
    let d = generator.dim();
    let mut a = generator.scaled(-1.0 / j);
    for i in 0..d {
        a[(i, i)] += 1.0;
    }
    let mut inv = Lu::factor(&a)?.inverse();
    for i in 0..d {
        for k in 0..d {
            let v = inv[(i, k)];
            if v < 0.0 {
                if v < -CLAMP_TOLERANCE {
                    return Err(Error::Numerical(format!(
                        "resolvent entry ({},{}) is {v:e}",
                        i + 1,
                        k + 1
                    )));
                }
                inv[(i, k)] = 0.0;
            }
        }
    }
    Ok(inv)
}

/// Stationary distribution of an irreducible generator.
///
/// Solves `Gᵀμ = 0` with the last equation replaced by `Σμ = 1`.
pub fn stationary_distribution(generator: &DenseMatrix) -> Result<ProbVector> {
    let d = generator.dim();
    if d == 0 {
        return Err(Error::InvalidArgument("empty generator".into()));
    }
    let mut system = generator.transpose();
    for j in 0..d {
        system[(d - 1, j)] = 1.0;
    }
    let mut rhs = vec![0.0; d];
    rhs[d - 1] = 1.0;
    let mut mu = Lu::factor(&system)?.solve(&rhs);

    let scale = (0..d).map(|i| generator[(i, i)].abs()).fold(1.0, f64::max);
    if let Some(i) = mu.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::Numerical(format!(
            "stationary entry {} is {:e}; generator is not irreducible",
            i + 1,
            mu[i]
        )));
    }
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= total);

    let residual = generator.vec_mul(&mu).iter().fold(0.0f64, |r, v| r.max(v.abs()));
    if residual > 1e-10 * scale {
        return Err(Error::Numerical(format!("stationary residual {residual:e}")));
    }
    ProbVector::new(mu)
}

/// True iff the graph with an edge `i → j` for every positive off-diagonal
/// entry is strongly connected.
pub fn is_strongly_connected(generator: &DenseMatrix) -> bool {
    let d = generator.dim();
    if d <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; d];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..d {
                let w = if forward { generator[(u, v)] } else { generator[(v, u)] };
                if v != u && w > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![-a, a], vec![b, -b]]).unwrap()
    }

    fn tridiag(d: usize, w: f64) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(d);
        for i in 0..d - 1 {
            g[(i, i + 1)] = w;
            g[(i + 1, i)] = w;
        }
        for i in 0..d {
            let s: f64 = (0..d).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
            g[(i, i)] = -s;
        }
        g
    }

    #[test]
    fn resolvent_of_zero_generator_is_identity() {
        let r = resolvent(&DenseMatrix::zeros(2), 1.0).unwrap();
        assert_eq!(r, DenseMatrix::identity(2));
    }

    #[test]
    fn resolvent_two_state_hand_inverse() {
        // I − G = [[2,−1],[−1,2]], inverse = [[2,1],[1,2]]/3
        let r = resolvent(&two_state(1.0, 1.0), 1.0).unwrap();
        let expected = DenseMatrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        assert!(r.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn resolvent_round_trip_and_stochastic() {
        let g = tridiag(6, 2.5);
        for j in [0.5, 1.0, 3.0, 17.0] {
            let r = resolvent(&g, j).unwrap();
            for s in r.row_sums() {
                assert!((s - 1.0).abs() < 1e-10);
            }
            assert!(r.as_slice().iter().all(|&v| v >= 0.0));
            let mut a = g.scaled(-1.0 / j);
            for i in 0..6 {
                a[(i, i)] += 1.0;
            }
            assert!(r.matmul(&a).max_abs_diff(&DenseMatrix::identity(6)) < 1e-10);
        }
    }

    #[test]
    fn resolvent_rejects_nonpositive_index() {
        assert!(resolvent(&tridiag(3, 1.0), 0.0).is_err());
    }

    #[test]
    fn stationary_two_state_balance() {
        let mu = stationary_distribution(&two_state(1.0, 3.0)).unwrap();
        assert!((mu[0] - 0.75).abs() < 1e-15);
        assert!((mu[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn stationary_symmetric_is_uniform() {
        let mu = stationary_distribution(&tridiag(7, 1.3)).unwrap();
        for &m in mu.as_slice() {
            assert!((m - 1.0 / 7.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_rejects_reducible() {
        let mut g = DenseMatrix::zeros(4);
        g[(0, 1)] = 1.0;
        g[(0, 0)] = -1.0;
        g[(1, 0)] = 1.0;
        g[(1, 1)] = -1.0;
        g[(2, 3)] = 1.0;
        g[(2, 2)] = -1.0;
        g[(3, 2)] = 1.0;
        g[(3, 3)] = -1.0;
        assert!(stationary_distribution(&g).is_err());
        assert!(!is_strongly_connected(&g));
    }

    #[test]
    fn connectivity_cases() {
        assert!(is_strongly_connected(&tridiag(4, 1.0)));
        let d = 5;
        let mut cycle = DenseMatrix::zeros(d);
        for i in 0..d {
            cycle[(i, (i + 1) % d)] = 2.0;
            cycle[(i, i)] = -2.0;
        }
        assert!(is_strongly_connected(&cycle));
        // one-way path is not strongly connected
        let mut path = DenseMatrix::zeros(3);
        path[(0, 1)] = 1.0;
        path[(0, 0)] = -1.0;
        path[(1, 2)] = 1.0;
        path[(1, 1)] = -1.0;
        assert!(!is_strongly_connected(&path));
    }

    #[test]
    fn lu_solves_pivoting_system() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let x = Lu::factor(&a).unwrap().solve(&[5.0, 3.0, 6.0]);
        let b = a.mul_vec(&x);
        for (bi, ei) in b.iter().zip([5.0, 3.0, 6.0]) {
            assert!((bi - ei).abs() < 1e-14);
        }
        assert!(matches!(Lu::factor(&DenseMatrix::zeros(2)), Err(Error::Singular)));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }
}
