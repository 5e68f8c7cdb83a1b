//! Seeded Monte Carlo estimators: Jansen total indices, derivative-based
//! measures, standardized linear coefficients, and the gradient outer-product
//! matrix `C_hat`.
//!
//! Every estimator keeps the raw evaluations it used so the bootstrap can
//! resample them without touching the model again.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{natural_unchecked, Model};
use crate::par::map_indexed;
use crate::symeig::SymmetricMatrix;

/// The five sensitivity metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Tsi,
    Dgsm,
    LinearCoeff,
    Eigvec1,
    ActivityScore,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Tsi,
        MetricKind::Dgsm,
        MetricKind::LinearCoeff,
        MetricKind::Eigvec1,
        MetricKind::ActivityScore,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Tsi => "tsi",
            MetricKind::Dgsm => "dgsm",
            MetricKind::LinearCoeff => "linear_coeff",
            MetricKind::Eigvec1 => "eigvec1",
            MetricKind::ActivityScore => "activity_score",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Monte Carlo estimate of one metric for every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub metric: MetricKind,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub evaluations_used: usize,
    pub seed: u64,
}

/// Independent random streams carved out of one seed.
///
/// Each stream is a ChaCha8 generator seeded with `seed_from_u64(seed)` and
/// switched to a fixed stream id, so the sample layout depends only on the
/// seed and the id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    JansenA = 1,
    JansenB = 2,
    Dgsm = 3,
    Linear = 4,
    GradientMatrix = 5,
    Summary = 6,
    BootTsi = 11,
    BootDgsm = 12,
    BootLinear = 13,
    BootEigen = 14,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    rng_for_id(seed, stream as u64)
}

pub(crate) fn rng_for_id(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` i.i.d. uniform points on `[-1, 1]^m`, row-major.
pub fn uniform_points(rng: &mut ChaCha8Rng, count: usize, m: usize) -> Vec<f64> {
    (0..count * m).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Points with optional model values and normalized gradients, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub dim: usize,
    pub points: Vec<f64>,
    pub values: Option<Vec<f64>>,
    pub gradients: Option<Vec<f64>>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.points.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn gradient(&self, j: usize) -> Option<&[f64]> {
        self.gradients
            .as_ref()
            .map(|g| &g[j * self.dim..(j + 1) * self.dim])
    }
}

const CHUNK: usize = 512;

/// Evaluate the model on row-major normalized points. Work is chunked so the
/// result order (and hence every downstream reduction) is fixed.
pub(crate) fn evaluate_rows(
    model: &dyn Model,
    points: &[f64],
    with_gradients: bool,
    threads: usize,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let m = model.dim();
    let rows = points.len() / m;
    let params = model.parameters();
    let chunks = rows.div_ceil(CHUNK);
    let parts = map_indexed(chunks, threads, |c| -> Result<(Vec<f64>, Vec<f64>)> {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(rows);
        let mut vals = Vec::with_capacity(hi - lo);
        let mut grads = Vec::with_capacity(if with_gradients { (hi - lo) * m } else { 0 });
        for j in lo..hi {
            let x = &points[j * m..(j + 1) * m];
            let natural = natural_unchecked(params, x);
            let f = if with_gradients {
                let (f, g) = model.value_and_gradient(&natural);
                for (i, (gi, p)) in g.iter().zip(params).enumerate() {
                    let v = gi * p.half_width();
                    if !v.is_finite() {
                        return Err(Error::Evaluation {
                            location: format!("sample {j}"),
                            detail: format!("gradient component {i} = {v}"),
                        });
                    }
                    grads.push(v);
                }
                f
            } else {
                model.evaluate(&natural)
            };
            if !f.is_finite() {
                return Err(Error::Evaluation {
                    location: format!("sample {j}"),
                    detail: format!("value {f}"),
                });
            }
            vals.push(f);
        }
        Ok((vals, grads))
    });
    let mut values = Vec::with_capacity(rows);
    let mut gradients = with_gradients.then(|| Vec::with_capacity(rows * m));
    for part in parts {
        let (v, g) = part?;
        values.extend(v);
        if let Some(all) = gradients.as_mut() {
            all.extend(g);
        }
    }
    Ok((values, gradients))
}

/// Mean and sample variance (denominator `n - 1`) of the selected entries.
pub fn mean_and_variance(values: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&j| values[j]).sum::<f64>() / n;
    let ss: f64 = rows.iter().map(|&j| (values[j] - mean).powi(2)).sum();
    let var = if rows.len() > 1 { ss / (n - 1.0) } else { 0.0 };
    (mean, var)
}

pub(crate) fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Evaluations behind a Jansen estimate: `f_A` and one `f_{B_i}` per input.
///
/// Row `j` of `B_i` equals row `j` of `A` except in column `i`, which comes
/// from `B`, so `f_A - f_{B_i}` isolates the total effect of input `i`.
#[derive(Debug, Clone)]
pub struct JansenRun {
    pub f_a: Vec<f64>,
    pub f_b: Vec<Vec<f64>>,
    pub estimate: MetricEstimate,
}

/// Jansen's total-index statistic over the selected rows:
/// `||f_A - f_{B_i}||^2 / (2 n var(f_A))`.
pub fn jansen_statistic(f_a: &[f64], f_b: &[Vec<f64>], rows: &[usize]) -> Result<Vec<f64>> {
    let (_, var) = mean_and_variance(f_a, rows);
    if !(var > 0.0) {
        return Err(Error::degenerate("tsi", "sample variance of f_A is zero"));
    }
    let denom = 2.0 * rows.len() as f64 * var;
    Ok(f_b
        .iter()
        .map(|fb| rows.iter().map(|&j| (f_a[j] - fb[j]).powi(2)).sum::<f64>() / denom)
        .collect())
}

/// Jansen total sensitivity indices from `m_prime` rows of `A` and `B`.
///
/// Costs `m_prime (m + 1)` evaluations; `f_B` itself is never needed.
/// Standard errors are left at zero for the bootstrap to fill in.
pub fn jansen_tsi(
    model: &dyn Model,
    m_prime: usize,
    seed: u64,
    threads: usize,
) -> Result<JansenRun> {
    if m_prime < 2 {
        return Err(Error::precondition(format!(
            "Jansen estimator needs at least 2 rows, got {m_prime}"
        )));
    }
    let m = model.dim();
    let a = uniform_points(&mut rng_for(seed, Stream::JansenA), m_prime, m);
    let b = uniform_points(&mut rng_for(seed, Stream::JansenB), m_prime, m);

    // Stack A and every B_i into one batch so a single pass evaluates them all.
    let mut stacked = Vec::with_capacity(m_prime * m * (m + 1));
    stacked.extend_from_slice(&a);
    for i in 0..m {
        let mut bi = a.clone();
        for j in 0..m_prime {
            bi[j * m + i] = b[j * m + i];
        }
        stacked.extend(bi);
    }
    let (values, _) = evaluate_rows(model, &stacked, false, threads)?;
    let f_a = values[..m_prime].to_vec();
    let f_b: Vec<Vec<f64>> = (0..m)
        .map(|i| values[(i + 1) * m_prime..(i + 2) * m_prime].to_vec())
        .collect();
    let tau = jansen_statistic(&f_a, &f_b, &all_rows(m_prime))?;
    Ok(JansenRun {
        f_a,
        f_b,
        estimate: MetricEstimate {
            metric: MetricKind::Tsi,
            values: tau,
            standard_errors: vec![0.0; m],
            evaluations_used: m_prime * (m + 1),
            seed,
        },
    })
}

/// Evaluations behind a gradient-based estimate.
#[derive(Debug, Clone)]
pub struct GradientRun {
    pub batch: SampleBatch,
    pub estimate: MetricEstimate,
}

impl GradientRun {
    pub fn gradients(&self) -> &[f64] {
        self.batch.gradients.as_deref().unwrap_or(&[])
    }
}

/// Mean squared normalized partial derivatives over the selected rows.
pub fn dgsm_statistic(gradients: &[f64], m: usize, rows: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; m];
    for &j in rows {
        for (a, g) in acc.iter_mut().zip(&gradients[j * m..(j + 1) * m]) {
            *a += g * g;
        }
    }
    let n = rows.len() as f64;
    acc.iter().map(|a| a / n).collect()
}

/// The closed-form DGSM error formula exactly as commonly printed:
/// `[ (1/(M-1)) sum_j ((df/dx_i)^2 - nu_hat_i)^2 ]^{1/2}`.
///
/// Note this is the sample standard deviation of the squared derivative and
/// carries no `1/sqrt(M)` factor, so it does not shrink with `M`. Divide by
/// `sqrt(M)` for the standard error of the mean.
pub fn dgsm_printed_se(gradients: &[f64], m: usize, nu_hat: &[f64]) -> Vec<f64> {
    let rows = gradients.len() / m;
    let mut acc = vec![0.0; m];
    for j in 0..rows {
        for i in 0..m {
            let g = gradients[j * m + i];
            acc[i] += (g * g - nu_hat[i]).powi(2);
        }
    }
    acc.iter()
        .map(|a| (a / (rows as f64 - 1.0)).sqrt())
        .collect()
}

fn gradient_batch(
    model: &dyn Model,
    samples: usize,
    seed: u64,
    stream: Stream,
    threads: usize,
) -> Result<SampleBatch> {
    let m = model.dim();
    let points = uniform_points(&mut rng_for(seed, stream), samples, m);
    let (values, gradients) = evaluate_rows(model, &points, true, threads)?;
    Ok(SampleBatch {
        seed,
        dim: m,
        points,
        values: Some(values),
        gradients,
    })
}

/// Monte Carlo derivative-based measures from `samples` gradients.
///
/// The attached standard errors are the printed closed form (see
/// [`dgsm_printed_se`]); the analysis pipeline replaces them with bootstrap
/// errors.
pub fn mc_dgsm(
    model: &dyn Model,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<GradientRun> {
    if samples < 2 {
        return Err(Error::precondition(format!(
            "DGSM estimate needs at least 2 samples, got {samples}"
        )));
    }
    let m = model.dim();
    let batch = gradient_batch(model, samples, seed, Stream::Dgsm, threads)?;
    let grads = batch.gradients.as_deref().unwrap();
    let nu = dgsm_statistic(grads, m, &all_rows(samples));
    let se = dgsm_printed_se(grads, m, &nu);
    Ok(GradientRun {
        estimate: MetricEstimate {
            metric: MetricKind::Dgsm,
            values: nu,
            standard_errors: se,
            evaluations_used: samples,
            seed,
        },
        batch,
    })
}

/// `C_hat = (1/n) sum_j g_j g_j^T` over the selected gradient rows.
pub fn gradient_outer_mean(gradients: &[f64], m: usize, rows: &[usize]) -> SymmetricMatrix {
    let mut upper = vec![0.0; m * (m + 1) / 2];
    for &j in rows {
        let g = &gradients[j * m..(j + 1) * m];
        let mut t = 0;
        for a in 0..m {
            for b in a..m {
                upper[t] += g[a] * g[b];
                t += 1;
            }
        }
    }
    let n = rows.len().max(1) as f64;
    upper.iter_mut().for_each(|u| *u /= n);
    SymmetricMatrix::from_upper(m, &upper).expect("triangle length matches dimension")
}

/// Monte Carlo estimate of `C` from `samples` gradients.
pub fn mc_c_matrix(
    model: &dyn Model,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<(SymmetricMatrix, SampleBatch)> {
    if samples < 1 {
        return Err(Error::precondition("C estimate needs at least one sample"));
    }
    let batch = gradient_batch(model, samples, seed, Stream::GradientMatrix, threads)?;
    let c = gradient_outer_mean(
        batch.gradients.as_deref().unwrap(),
        model.dim(),
        &all_rows(samples),
    );
    Ok((c, batch))
}

/// A least-squares linear fit `f ~ b0 + b^T x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Sample standard deviation (denominator `n - 1`) of the fitted values' targets.
    pub sigma: f64,
}

impl LinearFit {
    /// `beta_i = b_i / (sqrt(3) sigma)`.
    pub fn standardized(&self) -> Result<Vec<f64>> {
        if !(self.sigma > 0.0) {
            return Err(Error::degenerate(
                "linear_coeff",
                "sample standard deviation of f is zero",
            ));
        }
        let s = 3f64.sqrt() * self.sigma;
        Ok(self.slopes.iter().map(|b| b / s).collect())
    }
}

/// Least-squares fit on the selected rows.
///
/// Solved through a Householder QR of the design `[1 | X]` rather than the
/// normal equations, whose condition number is the square of the design's.
pub fn fit_linear(points: &[f64], values: &[f64], m: usize, rows: &[usize]) -> Result<LinearFit> {
    let n = rows.len();
    if n < m + 1 {
        return Err(Error::precondition(format!(
            "linear fit in {m} inputs needs at least {} rows, got {n}",
            m + 1
        )));
    }
    let design = DMatrix::from_fn(n, m + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            points[rows[r] * m + c - 1]
        }
    });
    let mut rhs = DVector::from_fn(n, |r, _| values[rows[r]]);
    let qr = design.qr();
    let r = qr.r();
    let scale = (0..=m).fold(0.0_f64, |acc, i| acc.max(r[(i, i)].abs()));
    if (0..=m).any(|i| r[(i, i)].abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::Numerical(
            "rank-deficient least-squares design".into(),
        ));
    }
    qr.q_tr_mul(&mut rhs);
    let top = rhs.rows(0, m + 1).into_owned();
    let coef = r
        .solve_upper_triangular(&top)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let (_, var) = mean_and_variance(values, rows);
    Ok(LinearFit {
        intercept: coef[0],
        slopes: coef.iter().skip(1).copied().collect(),
        sigma: var.sqrt(),
    })
}

/// Evaluations behind a linear-coefficient estimate.
#[derive(Debug, Clone)]
pub struct LinearRun {
    pub batch: SampleBatch,
    pub fit: LinearFit,
    pub estimate: MetricEstimate,
}

/// Standardized linear-fit coefficients from `samples` model values.
pub fn mc_linear_coeffs(
    model: &dyn Model,
    samples: usize,
    seed: u64,
    threads: usize,
) -> Result<LinearRun> {
    let m = model.dim();
    if samples < m + 2 {
        return Err(Error::precondition(format!(
            "linear fit in {m} inputs needs at least {} samples, got {samples}",
            m + 2
        )));
    }
    let points = uniform_points(&mut rng_for(seed, Stream::Linear), samples, m);
    let (values, _) = evaluate_rows(model, &points, false, threads)?;
    let fit = fit_linear(&points, &values, m, &all_rows(samples))?;
    let beta = fit.standardized()?;
    Ok(LinearRun {
        batch: SampleBatch {
            seed,
            dim: m,
            points,
            values: Some(values),
            gradients: None,
        },
        fit,
        estimate: MetricEstimate {
            metric: MetricKind::LinearCoeff,
            values: beta,
            standard_errors: vec![0.0; m],
            evaluations_used: samples,
            seed,
        },
    })
}
