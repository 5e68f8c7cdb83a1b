//! End-to-end pipelines: quadrature reference values for all five metrics,
//! the Monte Carlo pipeline with bootstrap standard errors, and the
//! multi-trial convergence study.

use serde::{Deserialize, Serialize};

use crate::active::{
    activity_scores, first_eigenvector, select_dimension, ActiveSubspace, SubspaceSource,
};
use crate::bootstrap::{bootstrap_eigvec_se, bootstrap_se, BootstrapConfig};
use crate::error::{Error, Result};
use crate::mc::{
    all_rows, dgsm_statistic, fit_linear, jansen_statistic, jansen_tsi, mc_c_matrix, mc_dgsm,
    mc_linear_coeffs, mean_and_variance, MetricEstimate, MetricKind, Stream,
};
use crate::model::Model;
use crate::par::map_indexed;
use crate::quad::{
    gauss_legendre, reference_linear_coeffs, reference_tsi, tensor_integrate, Integrands,
    LegendreCoefficients,
};
use crate::symeig::SymmetricMatrix;

/// Default number of Gauss-Legendre points per dimension.
pub const DEFAULT_QUAD_POINTS: usize = 7;

/// High-accuracy values of every metric from one tensor quadrature pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetrics {
    pub quad_points: usize,
    pub evaluations: usize,
    pub mean: f64,
    pub variance: f64,
    /// Variance recovered from the Legendre coefficients.
    pub spectral_variance: f64,
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    pub c: SymmetricMatrix,
    pub subspace: ActiveSubspace,
}

impl ReferenceMetrics {
    /// Values of `kind`; activity scores use dimension `n`.
    pub fn metric(&self, kind: MetricKind, n: usize) -> Result<Vec<f64>> {
        Ok(match kind {
            MetricKind::Tsi => self.tau.clone(),
            MetricKind::Dgsm => self.nu.clone(),
            MetricKind::LinearCoeff => self.beta.clone(),
            MetricKind::Eigvec1 => first_eigenvector(&self.subspace),
            MetricKind::ActivityScore => activity_scores(&self.subspace, n)?.scores,
        })
    }
}

/// Quadrature references with `k` points per dimension and coefficient
/// degree `k - 1`.
pub fn reference_metrics(model: &dyn Model, k: usize, threads: usize) -> Result<ReferenceMetrics> {
    if k < 2 {
        return Err(Error::precondition(format!(
            "reference values need at least 2 points per dimension, got {k}"
        )));
    }
    let pass = tensor_integrate(
        model,
        k,
        Integrands {
            gradient_outer: true,
            keep_values: true,
        },
        threads,
    )?;
    let rule = gauss_legendre(k)?;
    let values = pass.values.as_deref().expect("values were requested");
    let coeffs = LegendreCoefficients::from_grid_values(values, &rule, model.dim(), k - 1)?;
    let tau = reference_tsi(&coeffs)?;
    let beta = reference_linear_coeffs(&coeffs, pass.variance)?;
    let c = pass
        .c
        .clone()
        .expect("gradient outer product was requested");
    let nu = c.diagonal();
    let subspace =
        ActiveSubspace::from_matrix(&c, SubspaceSource::Quadrature { points_per_dim: k })?;
    Ok(ReferenceMetrics {
        quad_points: k,
        evaluations: pass.points,
        mean: pass.mean,
        variance: pass.variance,
        spectral_variance: coeffs.variance(),
        tau,
        nu,
        beta,
        c,
        subspace,
    })
}

/// Settings for one Monte Carlo analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
    pub bootstrap: usize,
    /// Activity-score dimension; the eigenvalue gap decides when absent.
    pub subspace_dim: Option<usize>,
    pub threads: usize,
}

/// All five Monte Carlo estimates with bootstrap standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMetrics {
    /// In [`MetricKind::ALL`] order.
    pub estimates: Vec<MetricEstimate>,
    pub subspace: ActiveSubspace,
    pub subspace_dim: usize,
    /// Sample variance of the linear-fit outputs.
    pub variance: f64,
}

impl MonteCarloMetrics {
    pub fn get(&self, kind: MetricKind) -> &MetricEstimate {
        self.estimates
            .iter()
            .find(|e| e.metric == kind)
            .expect("every metric is estimated")
    }
}

/// Smallest sample budget the pipeline accepts: two Jansen rows.
pub fn min_samples(m: usize) -> usize {
    2 * (m + 1)
}

/// Run every estimator on independent streams of `settings.seed`.
///
/// Jansen uses `M' = floor(M / (m + 1))` rows so its cost matches the
/// other metrics. Bootstrap resamples are drawn from their own streams of
/// the same seed.
pub fn monte_carlo_metrics(model: &dyn Model, settings: &McSettings) -> Result<MonteCarloMetrics> {
    let m = model.dim();
    let samples = settings.samples;
    if samples < min_samples(m) {
        return Err(Error::precondition(format!(
            "Monte Carlo analysis of {m} inputs needs at least {} samples, got {samples}",
            min_samples(m)
        )));
    }
    let seed = settings.seed;
    let threads = settings.threads;
    let boot = BootstrapConfig::new(settings.bootstrap, seed)?;

    let tsi = (|| {
        let run = jansen_tsi(model, samples / (m + 1), seed, threads)?;
        let se = bootstrap_se(run.f_a.len(), &boot, Stream::BootTsi, threads, |idx| {
            jansen_statistic(&run.f_a, &run.f_b, idx)
        })?;
        Ok(MetricEstimate {
            standard_errors: se,
            ..run.estimate
        })
    })()
    .map_err(|e: Error| e.in_metric("tsi"))?;

    let dgsm = (|| {
        let run = mc_dgsm(model, samples, seed, threads)?;
        let grads = run.gradients();
        let se = bootstrap_se(samples, &boot, Stream::BootDgsm, threads, |idx| {
            Ok(dgsm_statistic(grads, m, idx))
        })?;
        Ok(MetricEstimate {
            standard_errors: se,
            ..run.estimate
        })
    })()
    .map_err(|e: Error| e.in_metric("dgsm"))?;

    let mut variance = 0.0;
    let linear = (|| {
        let run = mc_linear_coeffs(model, samples, seed, threads)?;
        let points = &run.batch.points;
        let values = run
            .batch
            .values
            .as_deref()
            .expect("linear batch keeps values");
        variance = mean_and_variance(values, &all_rows(samples)).1;
        let se = bootstrap_se(samples, &boot, Stream::BootLinear, threads, |idx| {
            fit_linear(points, values, m, idx)
                .and_then(|fit| fit.standardized())
                .map_err(|e| match e {
                    Error::Numerical(d) => Error::degenerate("linear_coeff", d),
                    other => other,
                })
        })?;
        Ok(MetricEstimate {
            standard_errors: se,
            ..run.estimate
        })
    })()
    .map_err(|e: Error| e.in_metric("linear_coeff"))?;

    let (subspace, n, eigvec, activity) = (|| {
        let (c, batch) = mc_c_matrix(model, samples, seed, threads)?;
        let subspace =
            ActiveSubspace::from_matrix(&c, SubspaceSource::MonteCarlo { seed, samples })?;
        let n = match settings.subspace_dim {
            Some(n) => n,
            None => select_dimension(&subspace)?,
        };
        let w1 = first_eigenvector(&subspace);
        let alpha = activity_scores(&subspace, n)?.scores;
        let grads = batch.gradients.as_deref().expect("gradient batch");
        let se = bootstrap_eigvec_se(grads, m, n, &w1, &boot, threads)?;
        let est = |metric, values, standard_errors| MetricEstimate {
            metric,
            values,
            standard_errors,
            evaluations_used: samples,
            seed,
        };
        Ok((
            subspace,
            n,
            est(MetricKind::Eigvec1, w1, se.eigvec_se),
            est(MetricKind::ActivityScore, alpha, se.activity_se),
        ))
    })()
    .map_err(|e: Error| e.in_metric("active_subspace"))?;

    Ok(MonteCarloMetrics {
        estimates: vec![tsi, dgsm, linear, eigvec, activity],
        subspace,
        subspace_dim: n,
        variance,
    })
}

/// Run `trials` independent analyses with seeds `seed + t`.
///
/// Trials run on the pool; each trial is serial inside, so results do not
/// depend on the thread count.
pub fn run_trials(
    model: &dyn Model,
    samples: usize,
    trials: usize,
    settings: &McSettings,
) -> Result<Vec<MonteCarloMetrics>> {
    map_indexed(trials, settings.threads, |t| {
        monte_carlo_metrics(
            model,
            &McSettings {
                samples,
                seed: settings.seed.wrapping_add(t as u64),
                threads: 1,
                ..*settings
            },
        )
    })
    .into_iter()
    .collect()
}

/// `round(50 * 1000^(i/6))` for `i = 0..=6`: 50 to 50000 samples.
pub fn default_sample_grid() -> Vec<usize> {
    (0..=6)
        .map(|i| (50.0 * 1000f64.powf(i as f64 / 6.0)).round() as usize)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub metric: MetricKind,
    pub parameter: usize,
    pub samples: usize,
    /// Trial mean of `|gamma_i - gamma_hat_i| / max_j |gamma_j|`.
    pub rel_error: f64,
    /// Trial mean of `se_i / max_j |gamma_hat_j|`.
    pub std_error: f64,
}

/// Fitted log-log slopes against `M` for one metric. Absent when the grid
/// has a single entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSlope {
    pub metric: MetricKind,
    pub error_slope: Option<f64>,
    pub se_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub grid: Vec<usize>,
    pub trials: usize,
    pub subspace_dim: usize,
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<ConvergenceSlope>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Average relative errors and normalized standard errors over trials at
/// every grid size.
///
/// Activity scores use the reference subspace dimension (or the override)
/// so every trial estimates the same quantity. Monte Carlo eigenvectors are
/// sign-aligned with the reference before errors are taken. Slopes are
/// fitted to the mean over parameters of each averaged quantity.
pub fn convergence_study(
    model: &dyn Model,
    reference: &ReferenceMetrics,
    grid: &[usize],
    trials: usize,
    settings: &McSettings,
) -> Result<ConvergenceStudy> {
    if grid.is_empty() || trials == 0 {
        return Err(Error::precondition(
            "convergence study needs a nonempty grid and at least one trial",
        ));
    }
    let m = model.dim();
    let n = match settings.subspace_dim {
        Some(n) => n,
        None => select_dimension(&reference.subspace)?,
    };
    let refs: Vec<Vec<f64>> = MetricKind::ALL
        .iter()
        .map(|&k| reference.metric(k, n))
        .collect::<Result<_>>()?;

    let jobs = grid.len() * trials;
    let fixed = McSettings {
        subspace_dim: Some(n),
        ..*settings
    };
    let results = map_indexed(jobs, settings.threads, |job| {
        let (g, t) = (job / trials, job % trials);
        monte_carlo_metrics(
            model,
            &McSettings {
                samples: grid[g],
                seed: settings.seed.wrapping_add(t as u64),
                threads: 1,
                ..fixed
            },
        )
    });

    // acc[g][metric][param] = (rel_error sum, se sum)
    let mut acc = vec![vec![vec![(0.0, 0.0); m]; MetricKind::ALL.len()]; grid.len()];
    for (job, res) in results.into_iter().enumerate() {
        let run = res?;
        let g = job / trials;
        for (mi, &kind) in MetricKind::ALL.iter().enumerate() {
            let est = run.get(kind);
            let reference = &refs[mi];
            let mut values = est.values.clone();
            if kind == MetricKind::Eigvec1 {
                let dot: f64 = values.iter().zip(reference).map(|(a, b)| a * b).sum();
                if dot < 0.0 {
                    values.iter_mut().for_each(|v| *v = -*v);
                }
            }
            let ref_scale = max_abs(reference);
            let est_scale = max_abs(&values);
            for i in 0..m {
                let err = if ref_scale > 0.0 {
                    (reference[i] - values[i]).abs() / ref_scale
                } else {
                    0.0
                };
                let se = if est_scale > 0.0 {
                    est.standard_errors[i] / est_scale
                } else {
                    0.0
                };
                acc[g][mi][i].0 += err;
                acc[g][mi][i].1 += se;
            }
        }
    }

    let t = trials as f64;
    let mut rows = Vec::with_capacity(MetricKind::ALL.len() * m * grid.len());
    for (mi, &kind) in MetricKind::ALL.iter().enumerate() {
        for i in 0..m {
            for (g, &samples) in grid.iter().enumerate() {
                rows.push(ConvergenceRow {
                    metric: kind,
                    parameter: i,
                    samples,
                    rel_error: acc[g][mi][i].0 / t,
                    std_error: acc[g][mi][i].1 / t,
                });
            }
        }
    }

    let xs: Vec<f64> = grid.iter().map(|&s| s as f64).collect();
    let slopes = MetricKind::ALL
        .iter()
        .enumerate()
        .map(|(mi, &kind)| {
            let mean_over_params = |pick: fn(&(f64, f64)) -> f64| -> Vec<f64> {
                acc.iter()
                    .map(|per_g| per_g[mi].iter().map(pick).sum::<f64>() / (m as f64 * t))
                    .collect()
            };
            ConvergenceSlope {
                metric: kind,
                error_slope: loglog_slope(&xs, &mean_over_params(|p| p.0)),
                se_slope: loglog_slope(&xs, &mean_over_params(|p| p.1)),
            }
        })
        .collect();

    Ok(ConvergenceStudy {
        grid: grid.to_vec(),
        trials,
        subspace_dim: n,
        rows,
        slopes,
    })
}
