//! Generator matrices for the supported graph families.
//!
//! A generator has nonnegative off-diagonal rates and zero row sums. Every
//! [`GeneratorMatrix`] is validated on construction: it is irreducible, its
//! stationary distribution `mu` is solved once, and `theta_g` records the
//! largest diagonal magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, GeneratorError, Result};
use crate::numerics::{self, DenseMatrix, ProbVector};

/// Absolute tolerance on generator row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default cap on the dimension of a contingency product.
pub const DEFAULT_PRODUCT_CAP: usize = 4096;

/// Slack allowed when checking `theta >= theta_g`.
pub const THETA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    matrix: DenseMatrix,
    theta_g: f64,
    mu: ProbVector,
    labels: Option<Vec<String>>,
}

impl GeneratorMatrix {
    /// Validates `matrix` and solves for its stationary distribution.
    pub fn new(matrix: DenseMatrix, labels: Option<Vec<String>>) -> Result<Self> {
        validate(&matrix)?;
        if let Some(l) = &labels {
            if l.len() != matrix.dim() {
                return Err(GeneratorError::LabelCount {
                    expected: matrix.dim(),
                    got: l.len(),
                }
                .into());
            }
        }
        let theta_g = (0..matrix.dim()).map(|i| matrix[(i, i)].abs()).fold(0.0, f64::max);
        let mu = numerics::stationary_distribution(&matrix)?;
        Ok(Self {
            matrix,
            theta_g,
            mu,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let matrix = DenseMatrix::from_rows(rows).map_err(|e| match e {
            Error::Dimension(_) => Error::Generator(GeneratorError::NotSquare {
                rows: rows.len(),
                row: rows.iter().position(|r| r.len() != rows.len()).map_or(0, |i| i + 1),
                cols: rows.iter().find(|r| r.len() != rows.len()).map_or(0, Vec::len),
            }),
            other => other,
        })?;
        Self::new(matrix, None)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn theta_g(&self) -> f64 {
        self.theta_g
    }

    pub fn mu(&self) -> &ProbVector {
        &self.mu
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(GeneratorError::LabelCount {
                expected: self.dim(),
                got: labels.len(),
            }
            .into());
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Display name of category `x` (0-based): its label or its 1-based index.
    pub fn category_name(&self, x: usize) -> String {
        match &self.labels {
            Some(l) => l[x].clone(),
            None => (x + 1).to_string(),
        }
    }

    /// `Q = I + G/θ`, row-stochastic whenever `θ >= θ^G`.
    pub fn to_transition_kernel(&self, theta: f64) -> Result<DenseMatrix> {
        self.check_theta(theta)?;
        let d = self.dim();
        let mut q = self.matrix.scaled(1.0 / theta);
        for i in 0..d {
            q[(i, i)] = (q[(i, i)] + 1.0).max(0.0);
        }
        Ok(q)
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if !theta.is_finite() || theta <= 0.0 || theta < self.theta_g - THETA_SLACK {
            return Err(Error::ThetaBelowBound {
                theta,
                theta_g: self.theta_g,
            });
        }
        Ok(())
    }

    /// Serializable description that rebuilds this exact matrix.
    pub fn to_spec(&self) -> GeneratorSpec {
        GeneratorSpec::Explicit {
            matrix: self.matrix.to_rows(),
            labels: self.labels.clone(),
        }
    }
}

/// Checks the generator axioms and irreducibility.
pub fn validate(matrix: &DenseMatrix) -> std::result::Result<(), GeneratorError> {
    let d = matrix.dim();
    if d < 2 {
        return Err(GeneratorError::TooSmall { dim: d, min: 2 });
    }
    for i in 0..d {
        for j in 0..d {
            let v = matrix[(i, j)];
            if !v.is_finite() {
                return Err(GeneratorError::NonFinite { row: i + 1, col: j + 1 });
            }
            if i != j && v < 0.0 {
                return Err(GeneratorError::NegativeOffDiagonal {
                    row: i + 1,
                    col: j + 1,
                    value: v,
                });
            }
        }
    }
    for (i, sum) in matrix.row_sums().into_iter().enumerate() {
        if sum.abs() > ROW_SUM_TOLERANCE {
            return Err(GeneratorError::RowSum { row: i + 1, sum });
        }
    }
    if !numerics::is_strongly_connected(matrix) {
        return Err(GeneratorError::NotIrreducible);
    }
    Ok(())
}

fn fill_diagonal(g: &mut DenseMatrix) {
    let d = g.dim();
    for i in 0..d {
        let off: f64 = (0..d).filter(|&j| j != i).map(|j| g[(i, j)]).sum();
        g[(i, i)] = -off;
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeneratorError::Parameter(format!("{name} must be positive and finite, got {v}")).into())
    }
}

/// Complete directed graph with incoming weight `alpha[j]` on every edge into `j`.
pub fn dirichlet_graph(alpha: &[f64]) -> Result<GeneratorMatrix> {
    let d = alpha.len();
    if d < 2 {
        return Err(GeneratorError::TooSmall { dim: d, min: 2 }.into());
    }
    for &a in alpha {
        positive("alpha", a)?;
    }
    let total: f64 = alpha.iter().sum();
    let mut g = DenseMatrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = alpha[j];
        }
        g[(i, i)] = alpha[i] - total;
    }
    GeneratorMatrix::new(g, None)
}

/// Path graph with weight `w` between neighbouring categories.
pub fn tridiagonal(d: usize, w: f64) -> Result<GeneratorMatrix> {
    if d < 2 {
        return Err(GeneratorError::TooSmall { dim: d, min: 2 }.into());
    }
    positive("w", w)?;
    let mut g = DenseMatrix::zeros(d);
    for i in 0..d - 1 {
        g[(i, i + 1)] = w;
        g[(i + 1, i)] = w;
    }
    fill_diagonal(&mut g);
    GeneratorMatrix::new(g, None)
}

/// Cycle graph: the tridiagonal generator with the two ends joined.
pub fn wrapped_tridiagonal(d: usize, w: f64) -> Result<GeneratorMatrix> {
    if d < 3 {
        return Err(GeneratorError::TooSmall { dim: d, min: 3 }.into());
    }
    positive("w", w)?;
    let mut g = DenseMatrix::zeros(d);
    for i in 0..d {
        let j = (i + 1) % d;
        g[(i, j)] = w;
        g[(j, i)] = w;
    }
    fill_diagonal(&mut g);
    GeneratorMatrix::new(g, None)
}

/// Entrywise `(Σ c_i G_i) / divisor`.
pub fn average(parts: &[(f64, &GeneratorMatrix)], divisor: f64) -> Result<GeneratorMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| GeneratorError::Parameter("average needs at least one part".into()))?;
    positive("divisor", divisor)?;
    let d = first.1.dim();
    let mut g = DenseMatrix::zeros(d);
    for (c, part) in parts {
        positive("coefficient", *c)?;
        if part.dim() != d {
            return Err(Error::Dimension(format!(
                "average of dimensions {d} and {}",
                part.dim()
            )));
        }
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] += c * part.matrix()[(i, j)];
            }
        }
    }
    let g = g.scaled(1.0 / divisor);
    let labels = first.1.labels.clone();
    GeneratorMatrix::new(g, labels)
}

/// Generator on the product space `S_1 × … × S_k` that moves one factor at a
/// time using that factor's rates. States are ordered with the last factor
/// varying fastest.
pub fn contingency_product(factors: &[&GeneratorMatrix]) -> Result<GeneratorMatrix> {
    contingency_product_with_cap(factors, DEFAULT_PRODUCT_CAP)
}

pub fn contingency_product_with_cap(factors: &[&GeneratorMatrix], cap: usize) -> Result<GeneratorMatrix> {
    if factors.len() < 2 {
        return Err(GeneratorError::Parameter("contingency product needs at least two factors".into()).into());
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
    let total = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&t| t <= cap))
        .ok_or(GeneratorError::DimensionCap {
            dim: dims.iter().fold(1usize, |a, &d| a.saturating_mul(d)),
            cap,
        })?;

    // stride[j] = product of dims after j
    let mut stride = vec![1usize; dims.len()];
    for j in (0..dims.len() - 1).rev() {
        stride[j] = stride[j + 1] * dims[j + 1];
    }
    let mut g = DenseMatrix::zeros(total);
    for x in 0..total {
        for (j, factor) in factors.iter().enumerate() {
            let s = (x / stride[j]) % dims[j];
            let base = x - s * stride[j];
            for t in 0..dims[j] {
                if t != s {
                    g[(x, base + t * stride[j])] = factor.matrix()[(s, t)];
                }
            }
        }
    }
    fill_diagonal(&mut g);

    let labels = factors
        .iter()
        .map(|f| f.labels())
        .collect::<Option<Vec<_>>>()
        .map(|all| {
            (0..total)
                .map(|x| {
                    all.iter()
                        .enumerate()
                        .map(|(j, l)| l[(x / stride[j]) % dims[j]].as_str())
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .collect()
        });
    GeneratorMatrix::new(g, labels)
}

/// Serializable constructor description, one variant per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Explicit {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Dirichlet {
        alpha: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Tridiagonal {
        d: usize,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Wrapped {
        d: usize,
        w: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Average {
        divisor: f64,
        parts: Vec<AveragePart>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Contingency {
        factors: Vec<GeneratorSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragePart {
    pub coef: f64,
    pub spec: GeneratorSpec,
}

impl GeneratorSpec {
    pub fn tridiagonal(d: usize, w: f64) -> Self {
        Self::Tridiagonal { d, w, labels: None }
    }

    pub fn wrapped(d: usize, w: f64) -> Self {
        Self::Wrapped { d, w, labels: None }
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Self {
        Self::Dirichlet { alpha, labels: None }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("generator spec serializes")
    }

    /// Builds and validates the described generator.
    pub fn build(&self) -> Result<GeneratorMatrix> {
        let (built, labels) = match self {
            Self::Explicit { matrix, labels } => (GeneratorMatrix::from_rows(matrix)?, labels),
            Self::Dirichlet { alpha, labels } => (dirichlet_graph(alpha)?, labels),
            Self::Tridiagonal { d, w, labels } => (tridiagonal(*d, *w)?, labels),
            Self::Wrapped { d, w, labels } => (wrapped_tridiagonal(*d, *w)?, labels),
            Self::Average { divisor, parts, labels } => {
                let built = parts
                    .iter()
                    .map(|p| Ok((p.coef, p.spec.build()?)))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<_> = built.iter().map(|(c, g)| (*c, g)).collect();
                (average(&refs, *divisor)?, labels)
            }
            Self::Contingency { factors, labels } => {
                let built = factors.iter().map(GeneratorSpec::build).collect::<Result<Vec<_>>>()?;
                let refs: Vec<_> = built.iter().collect();
                (contingency_product(&refs)?, labels)
            }
        };
        match labels {
            Some(l) => built.with_labels(l.clone()),
            None => Ok(built),
        }
    }
}
