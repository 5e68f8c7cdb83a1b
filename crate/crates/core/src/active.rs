//! Active-subspace analytics: eigenpairs of `C`, dimension selection,
//! activity scores, the first-eigenvector metric, summary-plot samples, and
//! executable checks of the bounds linking activity scores to the other
//! metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{evaluate_rows, rng_for, uniform_points, Stream};
use crate::model::Model;
use crate::symeig::{eigh, Matrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubspaceSource {
    Quadrature { points_per_dim: usize },
    MonteCarlo { seed: u64, samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSubspace {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
    pub source: SubspaceSource,
}

impl ActiveSubspace {
    pub fn from_matrix(c: &SymmetricMatrix, source: SubspaceSource) -> Result<Self> {
        let eig = eigh(c)?;
        let eigenvalues = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        Ok(Self {
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `lambda_{j}` with 1-based `j`, zero past the end.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        if j == 0 {
            return f64::NAN;
        }
        self.eigenvalues.get(j - 1).copied().unwrap_or(0.0)
    }

    /// Whether `lambda_1` is separated from `lambda_2` by more than roundoff.
    pub fn leading_is_simple(&self) -> bool {
        let l1 = self.eigenvalue(1);
        let l2 = self.eigenvalue(2);
        l1 - l2 > 1e-12 * l1.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityScores {
    pub n: usize,
    pub scores: Vec<f64>,
}

pub(crate) fn activity_from_eigen(eigenvalues: &[f64], w: &Matrix, n: usize) -> Vec<f64> {
    (0..w.rows())
        .map(|i| {
            (0..n)
                .map(|j| eigenvalues[j].max(0.0) * w.get(i, j).powi(2))
                .sum()
        })
        .collect()
}

/// `alpha_i(n) = sum_{j <= n} lambda_j w_ij^2`.
pub fn activity_scores(sub: &ActiveSubspace, n: usize) -> Result<ActivityScores> {
    let m = sub.dim();
    if n == 0 || n > m {
        return Err(Error::precondition(format!(
            "subspace dimension must be in 1..={m}, got {n}"
        )));
    }
    Ok(ActivityScores {
        n,
        scores: activity_from_eigen(&sub.eigenvalues, &sub.eigenvectors, n),
    })
}

/// Activity scores for every `n = 1..=m`; row `n - 1` holds `alpha(n)`.
pub fn activity_score_sweep(sub: &ActiveSubspace) -> Vec<Vec<f64>> {
    (1..=sub.dim())
        .map(|n| activity_from_eigen(&sub.eigenvalues, &sub.eigenvectors, n))
        .collect()
}

/// Eigenvalues below this fraction of `lambda_1` are clamped before gaps
/// are measured, so roundoff-scale tails cannot win the comparison.
pub const DEFAULT_GAP_FLOOR: f64 = 1e-2;

/// Pick `n` at the largest drop in `log10(lambda)` between neighbours, with
/// eigenvalues clamped at `DEFAULT_GAP_FLOOR * lambda_1`. Ties go to the
/// smallest `n`.
pub fn select_dimension(sub: &ActiveSubspace) -> Result<usize> {
    select_dimension_with_floor(sub, DEFAULT_GAP_FLOOR)
}

/// [`select_dimension`] with an explicit relative floor in `(0, 1)`.
pub fn select_dimension_with_floor(sub: &ActiveSubspace, relative_floor: f64) -> Result<usize> {
    let m = sub.dim();
    if m < 2 {
        return Err(Error::precondition(
            "dimension selection needs at least two eigenvalues",
        ));
    }
    if !(relative_floor > 0.0 && relative_floor < 1.0) {
        return Err(Error::precondition(format!(
            "relative eigenvalue floor must lie in (0, 1), got {relative_floor}"
        )));
    }
    let l1 = sub.eigenvalues[0];
    if !(l1 > 0.0) {
        return Err(Error::degenerate(
            "active_subspace",
            "leading eigenvalue is zero (constant model)",
        ));
    }
    let floor = relative_floor * l1;
    let logs: Vec<f64> = sub
        .eigenvalues
        .iter()
        .map(|&l| l.max(floor).log10())
        .collect();
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 0..m - 1 {
        let gap = logs[i] - logs[i + 1];
        if gap > best_gap {
            best_gap = gap;
            best = i + 1;
        }
    }
    Ok(best)
}

/// Components of the leading eigenvector under the sign convention of
/// [`crate::symeig::eigh`].
pub fn first_eigenvector(sub: &ActiveSubspace) -> Vec<f64> {
    sub.eigenvectors.column(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// `alpha_i(n) <= nu_i`
    ActivityBelowDgsm,
    /// `tau_i <= (alpha_i(n) + lambda_{n+1}) / (4 pi^2 V)`
    TsiBelowActivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub bound: Bound,
    pub parameter: usize,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; negative when violated.
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub checks: Vec<BoundCheck>,
    /// `max_i |alpha_i(m) - nu_i|`.
    pub full_dimension_gap: f64,
    pub tolerance_activity: f64,
    pub tolerance_tsi: f64,
}

impl TheoremReport {
    pub fn all_hold(&self, bound: Bound) -> bool {
        self.checks
            .iter()
            .filter(|c| c.bound == bound)
            .all(|c| c.holds)
    }

    pub fn holds_at(&self, bound: Bound, n: usize) -> bool {
        self.checks
            .iter()
            .filter(|c| c.bound == bound && c.n == n)
            .all(|c| c.holds)
    }

    pub fn violations(&self) -> impl Iterator<Item = &BoundCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

/// Evaluate both bounds for every parameter and every `n = 1..=m`.
///
/// Violations are reported, not raised. `lambda_{m+1}` is taken as zero.
/// Tolerances are `1e-9` times the largest magnitude on each side.
pub fn theorem_checks(
    sub: &ActiveSubspace,
    nu: &[f64],
    tau: &[f64],
    variance: f64,
) -> Result<TheoremReport> {
    let m = sub.dim();
    for v in [nu.len(), tau.len()] {
        if v != m {
            return Err(Error::Dimension {
                expected: m,
                got: v,
            });
        }
    }
    let sweep = activity_score_sweep(sub);
    let nu_scale = nu.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
    let tol_a = 1e-9 * nu_scale;
    let tol_t = 1e-9 * tau.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut checks = Vec::with_capacity(2 * m * m);
    for n in 1..=m {
        let alpha = &sweep[n - 1];
        let lambda_next = sub.eigenvalue(n + 1);
        for i in 0..m {
            let slack = nu[i] - alpha[i];
            checks.push(BoundCheck {
                bound: Bound::ActivityBelowDgsm,
                parameter: i,
                n,
                lhs: alpha[i],
                rhs: nu[i],
                slack,
                holds: slack >= -tol_a,
            });
        }
        for i in 0..m {
            let rhs = (alpha[i] + lambda_next) / (4.0 * PI * PI * variance);
            let slack = rhs - tau[i];
            checks.push(BoundCheck {
                bound: Bound::TsiBelowActivity,
                parameter: i,
                n,
                lhs: tau[i],
                rhs,
                slack,
                holds: slack >= -tol_t,
            });
        }
    }
    let full_dimension_gap = sweep[m - 1]
        .iter()
        .zip(nu)
        .fold(0.0_f64, |a, (al, n)| a.max((al - n).abs()));
    Ok(TheoremReport {
        checks,
        full_dimension_gap,
        tolerance_activity: tol_a,
        tolerance_tsi: tol_t,
    })
}

/// One sample for a summary plot: the first two active coordinates and the
/// model output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub av1: f64,
    pub av2: f64,
    pub f: f64,
}

/// `samples` uniform draws projected onto `w_1` and `w_2`.
pub fn summary_plot_data(
    model: &dyn Model,
    sub: &ActiveSubspace,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<SummaryRow>> {
    let m = model.dim();
    if m < 2 || sub.dim() != m {
        return Err(Error::precondition(format!(
            "summary plots need m >= 2 and a matching subspace (m = {m}, subspace {})",
            sub.dim()
        )));
    }
    if samples == 0 {
        return Ok(Vec::new());
    }
    let points = uniform_points(&mut rng_for(seed, Stream::Summary), samples, m);
    let (values, _) = evaluate_rows(model, &points, false, threads)?;
    let w1 = sub.eigenvectors.column(0);
    let w2 = sub.eigenvectors.column(1);
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let x = &points[j * m..(j + 1) * m];
            let dot = |w: &[f64]| x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            SummaryRow {
                av1: dot(&w1),
                av2: dot(&w2),
                f,
            }
        })
        .collect())
}

/// `|gamma_i| / ||gamma||_2`; all zeros for a zero vector.
pub fn normalize_metric(values: &[f64]) -> Vec<f64> {
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| v.abs() / norm).collect()
}

/// Parameter indices ordered from most to least important by `|gamma_i|`,
/// ties broken by index.
pub fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order
}
