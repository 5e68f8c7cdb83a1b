//! Nonparametric bootstrap standard errors over stored evaluations.
//!
//! Resample index sets are drawn serially from a seeded stream; replicate
//! statistics may then be evaluated on a worker pool. A replicate whose
//! statistic reports a degenerate resample is redrawn, up to `10 B` draws in
//! total.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::active::activity_from_eigen;
use crate::error::{Error, Result};
use crate::mc::{gradient_outer_mean, rng_for, Stream};
use crate::par::map_indexed;
use crate::symeig::eigh;

pub const DEFAULT_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, seed: u64) -> Result<Self> {
        let cfg = Self { replicates, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 10 {
            return Err(Error::precondition(format!(
                "bootstrap needs at least 10 replicates, got {}",
                self.replicates
            )));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, rows: usize) -> Vec<usize> {
    (0..rows).map(|_| rng.gen_range(0..rows)).collect()
}

/// Replicate statistics for `B` resamples of `rows` units.
pub fn bootstrap_replicates<F>(
    rows: usize,
    cfg: &BootstrapConfig,
    stream: Stream,
    threads: usize,
    statistic: F,
) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync + Send,
{
    cfg.validate()?;
    if rows < 2 {
        return Err(Error::precondition(format!(
            "bootstrap needs at least 2 data rows, got {rows}"
        )));
    }
    let b = cfg.replicates;
    let mut rng = rng_for(cfg.seed, stream);
    let sets: Vec<Vec<usize>> = (0..b).map(|_| draw(&mut rng, rows)).collect();
    let mut results = map_indexed(b, threads, |r| statistic(&sets[r]));
    let mut attempts = b;
    for slot in results.iter_mut() {
        loop {
            match slot {
                Err(Error::Degenerate { .. }) => {
                    if attempts >= 10 * b {
                        return Err(Error::Numerical(format!(
                            "bootstrap gave up after {attempts} draws with degenerate resamples"
                        )));
                    }
                    attempts += 1;
                    *slot = statistic(&draw(&mut rng, rows));
                }
                _ => break,
            }
        }
    }
    results.into_iter().collect()
}

/// Per-component sample standard deviation (denominator `B - 1`) of
/// replicate vectors.
pub fn replicate_std(replicates: &[Vec<f64>]) -> Vec<f64> {
    let b = replicates.len();
    let width = replicates.first().map_or(0, Vec::len);
    if b < 2 {
        return vec![0.0; width];
    }
    (0..width)
        .map(|i| {
            let mean = replicates.iter().map(|r| r[i]).sum::<f64>() / b as f64;
            let ss: f64 = replicates.iter().map(|r| (r[i] - mean).powi(2)).sum();
            (ss / (b as f64 - 1.0)).sqrt()
        })
        .collect()
}

/// Bootstrap standard error of a statistic over resampled data rows.
pub fn bootstrap_se<F>(
    rows: usize,
    cfg: &BootstrapConfig,
    stream: Stream,
    threads: usize,
    statistic: F,
) -> Result<Vec<f64>>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync + Send,
{
    let reps = bootstrap_replicates(rows, cfg, stream, threads, statistic)?;
    Ok(replicate_std(&reps))
}

/// Standard errors for the leading eigenvector and the activity scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBootstrap {
    pub eigvec_se: Vec<f64>,
    pub activity_se: Vec<f64>,
}

/// Bootstrap the eigenvector and activity-score estimates of `C_hat`.
///
/// Each replicate rebuilds `C_hat*` from resampled gradient rows and flips
/// its leading eigenvector to have a nonnegative inner product with
/// `reference_w1` before it is accumulated. Activity scores use squared
/// components and are unaffected by the flip.
pub fn bootstrap_eigvec_se(
    gradients: &[f64],
    m: usize,
    n: usize,
    reference_w1: &[f64],
    cfg: &BootstrapConfig,
    threads: usize,
) -> Result<EigenBootstrap> {
    if n == 0 || n > m {
        return Err(Error::precondition(format!(
            "subspace dimension must be in 1..={m}, got {n}"
        )));
    }
    if reference_w1.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: reference_w1.len(),
        });
    }
    let rows = gradients.len() / m;
    let reps = bootstrap_replicates(rows, cfg, Stream::BootEigen, threads, |idx| {
        let c = gradient_outer_mean(gradients, m, idx);
        let eig = eigh(&c)?;
        let mut w1 = eig.eigenvectors.column(0);
        let dot: f64 = w1.iter().zip(reference_w1).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            w1.iter_mut().for_each(|v| *v = -*v);
        }
        let mut out = w1;
        out.extend(activity_from_eigen(&eig.eigenvalues, &eig.eigenvectors, n));
        Ok(out)
    })?;
    let se = replicate_std(&reps);
    Ok(EigenBootstrap {
        eigvec_se: se[..m].to_vec(),
        activity_se: se[m..].to_vec(),
    })
}
