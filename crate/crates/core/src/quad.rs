//! Tensor-product Gauss-Legendre quadrature with respect to the uniform
//! probability density on `[-1, 1]^m`, and the pseudospectral Legendre
//! coefficients used for reference variance decompositions.
//!
//! One-dimensional weights are normalized to sum to one, so tensor weights are
//! plain products of 1D weights. The grid is visited in odometer order (last
//! dimension fastest) and never materialized. For parallel runs the grid is
//! split into one block per index of the first dimension; blocks are reduced
//! in order, so the result is the same for every worker count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{natural_unchecked, Model};
use crate::par::map_indexed;
use crate::symeig::SymmetricMatrix;

/// Largest tensor grid the integrator will walk.
pub const MAX_GRID_NODES: u128 = 100_000_000;

const MAX_POINTS: usize = 50;
const MAX_NEWTON: usize = 100;

/// A 1D Gauss-Legendre rule normalized to the density 1/2 on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j w_j g(x_j)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// `P_k(x)` and `P_k'(x)` by the three-term recurrence.
fn legendre_with_derivative(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=k {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
    }
    let kf = k as f64;
    let dp = kf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The `k`-point Gauss-Legendre rule, `1 <= k <= 50`.
///
/// Nodes are roots of `P_k` found by Newton iteration from Chebyshev-like
/// initial guesses; the rule is mirrored so it is exactly symmetric.
pub fn gauss_legendre(k: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_POINTS).contains(&k) {
        return Err(Error::precondition(format!(
            "quadrature points must be in 1..={MAX_POINTS}, got {k}"
        )));
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    let half = k.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (p, d) = legendre_with_derivative(k, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-14 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "Newton iteration for Gauss-Legendre node {i} of {k} did not converge"
            )));
        }
        // One polishing step, then the derivative at the root.
        let (p, d) = legendre_with_derivative(k, x);
        x -= p / d;
        let (_, dp) = legendre_with_derivative(k, x);
        // Standard weight 2 / ((1 - x^2) P'^2), halved for the probability density.
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

/// Orthonormal Legendre polynomials `phi_0..=phi_p` at `x` under the density
/// 1/2 on `[-1, 1]`: `phi_d = sqrt(2d + 1) P_d`.
pub fn orthonormal_legendre(p: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p + 1);
    let (mut p0, mut p1) = (1.0, x);
    out.push(1.0);
    if p >= 1 {
        out.push(3f64.sqrt() * x);
    }
    for n in 2..=p {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * x * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
        out.push((2.0 * nf + 1.0).sqrt() * p2);
    }
    out
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Number of tensor grid nodes, refusing grids beyond [`MAX_GRID_NODES`].
pub fn grid_size(k: usize, m: usize) -> Result<usize> {
    let n = (k as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if n > MAX_GRID_NODES {
        return Err(Error::precondition(format!(
            "tensor grid of {k}^{m} = {n} nodes exceeds the limit of {MAX_GRID_NODES}; \
             that is about {n} model evaluations, use Monte Carlo instead"
        )));
    }
    Ok(n as usize)
}

/// What a tensor pass should accumulate besides mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Integrands {
    /// Accumulate `C = sum_j w_j grad f(x_j) grad f(x_j)^T`.
    pub gradient_outer: bool,
    /// Keep every node value (odometer order) for coefficient transforms.
    pub keep_values: bool,
}

/// Results of one streaming tensor pass.
#[derive(Debug, Clone)]
pub struct TensorIntegrals {
    pub points: usize,
    pub mean: f64,
    pub variance: f64,
    pub c: Option<SymmetricMatrix>,
    pub values: Option<Vec<f64>>,
}

impl TensorIntegrals {
    /// Derivative-based measures: the diagonal of `C`.
    pub fn nu(&self) -> Option<Vec<f64>> {
        self.c.as_ref().map(SymmetricMatrix::diagonal)
    }
}

struct BlockSums {
    f: KahanSum,
    f2: KahanSum,
    outer: Vec<KahanSum>,
    values: Vec<f64>,
}

/// Stream over the `k^m` tensor grid computing the requested moments.
///
/// Mean and variance are always returned. Variance uses a shift by the value
/// at the cube center to avoid cancellation.
pub fn tensor_integrate(
    model: &dyn Model,
    k: usize,
    want: Integrands,
    threads: usize,
) -> Result<TensorIntegrals> {
    let rule = gauss_legendre(k)?;
    let m = model.dim();
    let total = grid_size(k, m)?;
    let block = total / k;
    let params = model.parameters();
    let shift = model.evaluate(&natural_unchecked(params, &vec![0.0; m]));
    let shift = if shift.is_finite() { shift } else { 0.0 };
    let tri = m * (m + 1) / 2;

    let blocks = map_indexed(k, threads, |lead| -> Result<BlockSums> {
        let mut sums = BlockSums {
            f: KahanSum::default(),
            f2: KahanSum::default(),
            outer: vec![KahanSum::default(); if want.gradient_outer { tri } else { 0 }],
            values: Vec::with_capacity(if want.keep_values { block } else { 0 }),
        };
        let mut idx = vec![0usize; m];
        idx[0] = lead;
        let mut x = vec![0.0; m];
        for offset in 0..block {
            let mut w = 1.0;
            for d in 0..m {
                x[d] = rule.nodes[idx[d]];
                w *= rule.weights[idx[d]];
            }
            let node = lead * block + offset;
            let natural = natural_unchecked(params, &x);
            let (f, g) = if want.gradient_outer {
                let (f, g) = model.value_and_gradient(&natural);
                (f, Some(g))
            } else {
                (model.evaluate(&natural), None)
            };
            if !f.is_finite() {
                return Err(Error::Evaluation {
                    location: format!("quadrature node {node}"),
                    detail: format!("value {f}"),
                });
            }
            let fs = f - shift;
            sums.f.add(w * fs);
            sums.f2.add(w * fs * fs);
            if let Some(mut g) = g {
                for (gi, p) in g.iter_mut().zip(params) {
                    *gi *= p.half_width();
                }
                if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Evaluation {
                        location: format!("quadrature node {node}"),
                        detail: format!("gradient component {bad} = {}", g[bad]),
                    });
                }
                let mut t = 0;
                for a in 0..m {
                    let wa = w * g[a];
                    for b in a..m {
                        sums.outer[t].add(wa * g[b]);
                        t += 1;
                    }
                }
            }
            if want.keep_values {
                sums.values.push(f);
            }
            // Odometer increment over dimensions 1..m, last fastest.
            for d in (1..m).rev() {
                idx[d] += 1;
                if idx[d] < k {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(sums)
    });

    let mut f = KahanSum::default();
    let mut f2 = KahanSum::default();
    let mut outer = vec![KahanSum::default(); if want.gradient_outer { tri } else { 0 }];
    let mut values = want.keep_values.then(|| Vec::with_capacity(total));
    for b in blocks {
        let b = b?;
        f.merge(&b.f);
        f2.merge(&b.f2);
        for (acc, part) in outer.iter_mut().zip(&b.outer) {
            acc.merge(part);
        }
        if let Some(v) = values.as_mut() {
            v.extend_from_slice(&b.values);
        }
    }
    let centered = f.value();
    let mean = shift + centered;
    let variance = (f2.value() - centered * centered).max(0.0);
    let c = if want.gradient_outer {
        let upper: Vec<f64> = outer.iter().map(KahanSum::value).collect();
        Some(SymmetricMatrix::from_upper(m, &upper)?)
    } else {
        None
    };
    Ok(TensorIntegrals {
        points: total,
        mean,
        variance,
        c,
        values,
    })
}

/// Coefficients of the orthonormal tensor Legendre basis up to degree `p` in
/// each dimension, stored densely in odometer order over multi-indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreCoefficients {
    pub dim: usize,
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl LegendreCoefficients {
    /// Pseudospectral projection of grid values taken in odometer order on
    /// the tensor grid of `rule`.
    pub fn from_grid_values(
        values: &[f64],
        rule: &QuadratureRule,
        dim: usize,
        degree: usize,
    ) -> Result<Self> {
        let k = rule.len();
        if degree >= k {
            return Err(Error::precondition(format!(
                "coefficient degree {degree} needs more than {k} quadrature points"
            )));
        }
        let expected = grid_size(k, dim)?;
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        // proj[d][j] = w_j phi_d(x_j)
        let phi: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&x| orthonormal_legendre(degree, x))
            .collect();
        let np = degree + 1;
        let proj: Vec<f64> = (0..np)
            .flat_map(|d| (0..k).map(move |j| (d, j)))
            .map(|(d, j)| rule.weights[j] * phi[j][d])
            .collect();

        // Contract one mode at a time.
        let mut shape = vec![k; dim];
        let mut cur = values.to_vec();
        for axis in 0..dim {
            let outer: usize = shape[..axis].iter().product();
            let inner: usize = shape[axis + 1..].iter().product();
            let n = shape[axis];
            let mut next = vec![0.0; outer * np * inner];
            for o in 0..outer {
                for d in 0..np {
                    let row = &proj[d * k..d * k + n];
                    let dst = &mut next[(o * np + d) * inner..(o * np + d + 1) * inner];
                    for (j, &pj) in row.iter().enumerate() {
                        let src = &cur[(o * n + j) * inner..(o * n + j + 1) * inner];
                        for (t, &s) in dst.iter_mut().zip(src) {
                            *t += pj * s;
                        }
                    }
                }
            }
            shape[axis] = np;
            cur = next;
        }
        Ok(Self {
            dim,
            degree,
            coeffs: cur,
        })
    }

    fn flat_index(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dim || multi.iter().any(|&d| d > self.degree) {
            return None;
        }
        let np = self.degree + 1;
        Some(multi.iter().fold(0, |acc, &d| acc * np + d))
    }

    pub fn get(&self, multi: &[usize]) -> Option<f64> {
        self.flat_index(multi).map(|i| self.coeffs[i])
    }

    /// Iterate `(multi_index, coefficient)` in odometer order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let np = self.degree + 1;
        self.coeffs.iter().enumerate().map(move |(flat, &c)| {
            let mut multi = vec![0; self.dim];
            let mut r = flat;
            for d in (0..self.dim).rev() {
                multi[d] = r % np;
                r /= np;
            }
            (multi, c)
        })
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    /// Sum of squared coefficients over nonzero multi-indices.
    pub fn variance(&self) -> f64 {
        let mut acc = KahanSum::default();
        for c in &self.coeffs[1..] {
            acc.add(c * c);
        }
        acc.value()
    }

    /// Coefficient of the degree-one term in dimension `i`.
    pub fn linear(&self, i: usize) -> f64 {
        let mut multi = vec![0; self.dim];
        multi[i] = 1;
        self.get(&multi).unwrap_or(0.0)
    }
}

/// Pseudospectral coefficients of degree `p < k` from a `k`-point tensor rule.
pub fn legendre_coefficients(
    model: &dyn Model,
    k: usize,
    p: usize,
    threads: usize,
) -> Result<LegendreCoefficients> {
    if p >= k {
        return Err(Error::precondition(format!(
            "coefficient degree {p} must be below the point count {k}"
        )));
    }
    let rule = gauss_legendre(k)?;
    let pass = tensor_integrate(
        model,
        k,
        Integrands {
            gradient_outer: false,
            keep_values: true,
        },
        threads,
    )?;
    LegendreCoefficients::from_grid_values(&pass.values.unwrap(), &rule, model.dim(), p)
}

/// Total sensitivity indices from the variance carried by multi-indices
/// active in each dimension.
pub fn reference_tsi(coeffs: &LegendreCoefficients) -> Result<Vec<f64>> {
    let m = coeffs.dim;
    let mut partial = vec![KahanSum::default(); m];
    let mut total = KahanSum::default();
    for (multi, c) in coeffs.iter().skip(1) {
        let c2 = c * c;
        total.add(c2);
        for (acc, &d) in partial.iter_mut().zip(&multi) {
            if d > 0 {
                acc.add(c2);
            }
        }
    }
    let total = total.value();
    if total <= 0.0 {
        return Err(Error::degenerate("tsi", "total variance is zero"));
    }
    Ok(partial.iter().map(|p| p.value() / total).collect())
}

/// Standardized linear coefficients `beta_i = coeff(e_i) / sqrt(variance)`.
///
/// The best L2 linear fit has monomial slope `b_i = sqrt(3) coeff(e_i)`, and
/// `beta_i = b_i / (sqrt(3) sigma)`.
pub fn reference_linear_coeffs(coeffs: &LegendreCoefficients, variance: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0) {
        return Err(Error::degenerate(
            "linear_coeff",
            format!("variance must be positive, got {variance}"),
        ));
    }
    let sd = variance.sqrt();
    Ok((0..coeffs.dim).map(|i| coeffs.linear(i) / sd).collect())
}
