//! Self-check suite run by `msb verify`: exact identities of the analytic
//! engine, then Monte Carlo agreement between sampler and engine.

use std::fmt;

use crate::error::Result;
use crate::generator::{dirichlet_graph, GeneratorMatrix};
use crate::moments::{
    moment_bruteforce, moment_conditional, moment_unconditional, moment_via_theta_recursion, MomentQuery, Root,
    DEFAULT_BRUTE_CAP,
};
use crate::numerics::{DenseMatrix, Lu};
use crate::posterior::{posterior_mean_pmf, CountVector};
use crate::sampler::{mc_moment_estimate, mc_moment_estimates, support_coverage, DEFAULT_EPS};

/// Below this many draws the statistical checks are skipped.
pub const MIN_SAMPLES: u64 = 1000;

/// Standard-error multiple for Monte Carlo checks. The suite runs 2d+2
/// comparisons, so the per-check bound is wider than a single 3-SE test.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Validation,
    Exact,
    Statistical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub kind: CheckKind,
    pub name: String,
    pub status: Status,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        write!(f, "{tag:<5}{}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    /// 0 when everything passed; otherwise 1, 2 or 3 for the most basic
    /// failing category (validation, exact, statistical).
    pub fn exit_code(&self) -> u8 {
        let failed = |k| self.checks.iter().any(|c| c.kind == k && c.status == Status::Fail);
        if failed(CheckKind::Validation) {
            1
        } else if failed(CheckKind::Exact) {
            2
        } else if failed(CheckKind::Statistical) {
            3
        } else {
            0
        }
    }

    fn push(&mut self, kind: CheckKind, name: impl Into<String>, ok: bool, detail: String) {
        let status = if ok { Status::Pass } else { Status::Fail };
        self.checks.push(Check {
            kind,
            name: name.into(),
            status,
            detail,
        });
    }

    fn push_result(&mut self, kind: CheckKind, name: &str, r: Result<(bool, String)>) {
        match r {
            Ok((ok, detail)) => self.push(kind, name, ok, detail),
            Err(e) => self.push(kind, name, false, format!("error: {e}")),
        }
    }

    fn skip(&mut self, name: impl Into<String>, detail: &str) {
        self.checks.push(Check {
            kind: CheckKind::Statistical,
            name: name.into(),
            status: Status::Skipped,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Settings for [`run_suite`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub samples: u64,
    pub seed: u64,
    pub eps: f64,
}

impl VerifyConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            eps: DEFAULT_EPS,
        }
    }
}

/// Runs the suite on an already-parsed generator, or reports the validation
/// failure when `built` is an error.
pub fn run_suite(built: Result<GeneratorMatrix>, cfg: VerifyConfig) -> Report {
    let mut report = Report::default();
    let g = match built {
        Ok(g) => {
            report.push(
                CheckKind::Validation,
                "generator validation",
                true,
                format!("d = {}, theta_G = {}", g.dim(), g.theta_g()),
            );
            g
        }
        Err(e) => {
            report.push(CheckKind::Validation, "generator validation", false, e.to_string());
            return report;
        }
    };
    exact_checks(&g, &mut report);
    if cfg.samples < MIN_SAMPLES {
        report.warnings.push(format!(
            "{} samples is below the minimum of {MIN_SAMPLES}; statistical checks skipped",
            cfg.samples
        ));
        report.skip("Monte Carlo checks", "too few samples");
    } else {
        statistical_checks(&g, cfg, &mut report);
    }
    report
}

fn second_moment_closed_form(g: &GeneratorMatrix) -> Result<Vec<f64>> {
    let d = g.dim();
    let mut a = DenseMatrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] -= g.matrix()[(i, j)];
        }
    }
    let inv = Lu::factor(&a)?.inverse();
    Ok((0..d).map(|x| g.mu()[x] * inv[(x, x)]).collect())
}

fn max_err(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    pairs.fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

/// Small deterministic queries covering singletons and multi-category sets.
fn probe_queries(d: usize) -> Vec<MomentQuery> {
    let mut qs = vec![MomentQuery::new(d, vec![vec![0]], vec![3]).expect("valid query")];
    qs.push(MomentQuery::new(d, vec![vec![0], vec![d - 1]], vec![2, 2]).expect("valid query"));
    if d >= 3 {
        let half = d / 2;
        qs.push(
            MomentQuery::new(
                d,
                vec![(0..half).collect(), (half..d - 1).collect(), vec![d - 1]],
                vec![2, 1, 2],
            )
            .expect("valid query"),
        );
    }
    qs
}

fn exact_checks(g: &GeneratorMatrix, report: &mut Report) {
    let d = g.dim();
    let mu = g.mu().as_slice().to_vec();

    report.push_result(
        CheckKind::Exact,
        "first moment E[nu(x)] = mu_x",
        (|| {
            let got = (0..d)
                .map(|x| moment_unconditional(g, &MomentQuery::new(d, vec![vec![x]], vec![1])?))
                .collect::<Result<Vec<_>>>()?;
            let err = max_err(got.into_iter().zip(mu.iter().copied()));
            Ok((err <= 1e-12, format!("max error {err:.2e} (tol 1e-12)")))
        })(),
    );

    report.push_result(
        CheckKind::Exact,
        "second moment E[nu(x)^2] = mu_x (I-G)^-1_xx",
        (|| {
            let closed = second_moment_closed_form(g)?;
            let got = (0..d)
                .map(|x| moment_unconditional(g, &MomentQuery::new(d, vec![vec![x]], vec![2])?))
                .collect::<Result<Vec<_>>>()?;
            let err = max_err(got.into_iter().zip(closed));
            Ok((err <= 1e-10, format!("max error {err:.2e} (tol 1e-10)")))
        })(),
    );

    report.push_result(
        CheckKind::Exact,
        "dynamic programme vs permutation enumeration",
        (|| {
            let mut err = 0.0f64;
            for q in probe_queries(d) {
                for root in [Root::Stationary, Root::Category(0)] {
                    let dp = match root {
                        Root::Stationary => moment_unconditional(g, &q)?,
                        Root::Category(x) => moment_conditional(g, &q, x)?,
                    };
                    err = err.max((dp - moment_bruteforce(g, &q, root, DEFAULT_BRUTE_CAP)?).abs());
                }
            }
            Ok((err <= 1e-10, format!("max error {err:.2e} (tol 1e-10)")))
        })(),
    );

    report.push_result(
        CheckKind::Exact,
        "theta-invariance of the moment recursion",
        (|| {
            let mut err = 0.0f64;
            for q in probe_queries(d) {
                let dp = moment_unconditional(g, &q)?;
                for factor in [1.0, 2.0, 10.0] {
                    let v = moment_via_theta_recursion(g, factor * g.theta_g(), &q, Root::Stationary)?;
                    err = err.max((v - dp).abs());
                }
            }
            Ok((err <= 1e-8, format!("max error {err:.2e} (tol 1e-8)")))
        })(),
    );

    report.push_result(
        CheckKind::Exact,
        "Dirichlet-graph posterior closed form",
        (|| {
            let theta = g.theta_g();
            let alpha: Vec<f64> = mu.iter().map(|m| theta * m).collect();
            let dg = dirichlet_graph(&alpha)?;
            let counts = CountVector::new((0..d).map(|x| (x % 3) as u32).collect());
            let n = counts.total() as f64;
            let pmf = posterior_mean_pmf(&dg, &counts)?;
            let err = max_err((0..d).map(|x| (pmf[x], (alpha[x] + counts.as_slice()[x] as f64) / (theta + n))));
            Ok((err <= 1e-10, format!("max error {err:.2e} (tol 1e-10)")))
        })(),
    );

    report.push_result(
        CheckKind::Exact,
        "posterior pmf normalisation",
        (|| {
            let counts = CountVector::new((0..d).map(|x| ((x * 7) % 4) as u32).collect());
            let pmf = posterior_mean_pmf(g, &counts)?;
            let err = (pmf.as_slice().iter().sum::<f64>() - 1.0).abs();
            Ok((err <= 1e-10, format!("|sum - 1| = {err:.2e} (tol 1e-10)")))
        })(),
    );
}

fn mc_check(report: &mut Report, name: String, exact: Result<f64>, estimate: Result<crate::sampler::McEstimate>) {
    report.push_result(
        CheckKind::Statistical,
        &name,
        (|| {
            let exact = exact?;
            let est = estimate?;
            let z = est.z_score(exact);
            Ok((
                z <= Z_LIMIT,
                format!(
                    "estimate {:.6} +/- {:.2e} vs {exact:.6}, |z| = {z:.2} (tol {Z_LIMIT} SE)",
                    est.estimate, est.std_error
                ),
            ))
        })(),
    );
}

fn statistical_checks(g: &GeneratorMatrix, cfg: VerifyConfig, report: &mut Report) {
    let d = g.dim();
    let theta = g.theta_g();
    let n = cfg.samples;
    let mut seed = cfg.seed;
    let mut next_seed = || {
        seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        seed
    };
    let terms: Vec<(u32, usize)> = [1u32, 2].iter().flat_map(|&p| (0..d).map(move |x| (p, x))).collect();
    let queries: Vec<MomentQuery> = terms
        .iter()
        .map(|&(p, x)| MomentQuery::new(d, vec![vec![x]], vec![p]).expect("valid query"))
        .collect();
    match mc_moment_estimates(g, theta, &queries, n, cfg.eps, next_seed(), None) {
        Ok(estimates) => {
            for ((&(p, x), q), est) in terms.iter().zip(&queries).zip(estimates) {
                let label = if p == 1 { "nu(x)" } else { "nu(x)^2" };
                mc_check(
                    report,
                    format!("Monte Carlo E[{label}], x = {}", x + 1),
                    moment_unconditional(g, q),
                    Ok(est),
                );
            }
        }
        Err(e) => report.push(
            CheckKind::Statistical,
            "Monte Carlo moments",
            false,
            format!("error: {e}"),
        ),
    }
    let q = MomentQuery::new(d, vec![vec![0]], vec![2]).expect("valid query");
    mc_check(
        report,
        "Monte Carlo E[nu(1)^2 | T1 = 1]".into(),
        moment_conditional(g, &q, 0),
        mc_moment_estimate(g, theta, &q, n, cfg.eps, next_seed(), Some(0)),
    );
    mc_check(
        report,
        "Monte Carlo E[nu(1)^2] sampled at 2 theta_G".into(),
        moment_unconditional(g, &q),
        mc_moment_estimate(g, 2.0 * theta, &q, n, cfg.eps, next_seed(), None),
    );
    report.push_result(
        CheckKind::Statistical,
        "support coverage near mu (sup-norm 0.2)",
        (|| {
            let hits = support_coverage(g, theta, std::slice::from_ref(g.mu()), 0.2, n, next_seed())?;
            Ok((hits[0] > 0, format!("{} of {n} draws", hits[0])))
        })(),
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::tridiagonal;

    #[test]
    fn few_samples_skip_statistics() {
        let r = run_suite(tridiagonal(4, 1.0), VerifyConfig::new(10, 1));
        assert_eq!(r.warnings.len(), 1);
        assert!(r.checks.iter().any(|c| c.status == Status::Skipped));
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn invalid_generator_reports_validation() {
        let bad = GeneratorMatrix::from_rows(&[vec![-1.0, 1.001], vec![1.0, -1.0]]);
        let r = run_suite(bad, VerifyConfig::new(10, 1));
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.checks.len(), 1);
    }
}
