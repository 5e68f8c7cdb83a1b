//! Model abstraction and the affine map between natural parameter ranges and
//! the normalized hypercube `[-1, 1]^m`.
//!
//! Models are written on their natural scale. Every metric in this crate is
//! computed for the normalized model `x -> f(to_natural(x))`, whose gradient
//! is the natural gradient scaled by the half-widths `(max - min) / 2`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One input parameter: a labelled interval in natural units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub units: String,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, min: f64, max: f64, units: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            units: units.into(),
        }
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.max - self.min)
    }
}

/// Check that a parameter list is nonempty, has unique nonempty names, and
/// strictly ordered finite ranges.
pub fn validate_parameters(params: &[ParameterSpec]) -> Result<()> {
    if params.is_empty() {
        return Err(Error::precondition("a model needs at least one parameter"));
    }
    let mut seen = HashSet::new();
    for p in params {
        if p.name.is_empty() {
            return Err(Error::precondition("parameter name must be nonempty"));
        }
        if !seen.insert(p.name.as_str()) {
            return Err(Error::precondition(format!(
                "duplicate parameter name '{}'",
                p.name
            )));
        }
        if !(p.min.is_finite() && p.max.is_finite() && p.min < p.max) {
            return Err(Error::precondition(format!(
                "parameter '{}' needs finite min < max, got [{}, {}]",
                p.name, p.min, p.max
            )));
        }
    }
    Ok(())
}

/// A differentiable scalar model on a hyperrectangle.
///
/// Implementations must be pure: the same input gives the same output, and no
/// interior mutability is allowed. `gradient` returns natural-scale partial
/// derivatives.
pub trait Model: Send + Sync {
    fn parameters(&self) -> &[ParameterSpec];

    fn evaluate(&self, natural: &[f64]) -> f64;

    fn gradient(&self, natural: &[f64]) -> Vec<f64>;

    /// Value and gradient together. Override when the two share intermediates.
    fn value_and_gradient(&self, natural: &[f64]) -> (f64, Vec<f64>) {
        (self.evaluate(natural), self.gradient(natural))
    }

    fn dim(&self) -> usize {
        self.parameters().len()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.parameters().iter().map(|p| p.name.clone()).collect()
    }
}

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A model assembled from closures. Mostly useful for toy functions.
pub struct FnModel {
    params: Vec<ParameterSpec>,
    value: Box<ValueFn>,
    grad: Box<GradFn>,
}

impl FnModel {
    pub fn new<F, G>(params: Vec<ParameterSpec>, value: F, grad: G) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        validate_parameters(&params)?;
        Ok(Self {
            params,
            value: Box::new(value),
            grad: Box::new(grad),
        })
    }

    /// A model whose natural ranges are all `[-1, 1]`, so natural and
    /// normalized coordinates coincide.
    pub fn on_unit_cube<F, G>(m: usize, value: F, grad: G) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        let params = (1..=m)
            .map(|i| ParameterSpec::new(format!("x{i}"), -1.0, 1.0, ""))
            .collect();
        Self::new(params, value, grad)
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl Model for FnModel {
    fn parameters(&self) -> &[ParameterSpec] {
        &self.params
    }

    fn evaluate(&self, natural: &[f64]) -> f64 {
        (self.value)(natural)
    }

    fn gradient(&self, natural: &[f64]) -> Vec<f64> {
        (self.grad)(natural)
    }
}

/// A point of the normalized hypercube `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPoint(Vec<f64>);

impl NormalizedPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = coords
            .iter()
            .enumerate()
            .find(|(_, v)| !(-1.0..=1.0).contains(*v))
        {
            return Err(Error::precondition(format!(
                "coordinate {i} = {v} lies outside [-1, 1]"
            )));
        }
        Ok(Self(coords))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for NormalizedPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl AsRef<[f64]> for NormalizedPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn check_len(model: &dyn Model, x: &[f64]) -> Result<()> {
    let m = model.dim();
    if x.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: x.len(),
        });
    }
    Ok(())
}

fn format_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
    format!("x=[{}]", parts.join(", "))
}

/// Map a normalized point to natural units: `min + (x + 1)(max - min) / 2`.
pub fn to_natural(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>> {
    check_len(model, x)?;
    Ok(natural_unchecked(model.parameters(), x))
}

pub(crate) fn natural_unchecked(params: &[ParameterSpec], x: &[f64]) -> Vec<f64> {
    params
        .iter()
        .zip(x)
        .map(|(p, &xi)| p.min + (xi + 1.0) * p.half_width())
        .collect()
}

/// Inverse of [`to_natural`].
pub fn to_normalized(model: &dyn Model, natural: &[f64]) -> Result<Vec<f64>> {
    check_len(model, natural)?;
    Ok(model
        .parameters()
        .iter()
        .zip(natural)
        .map(|(p, &z)| (z - p.min) / p.half_width() - 1.0)
        .collect())
}

pub fn eval_normalized(model: &dyn Model, x: &[f64]) -> Result<f64> {
    check_len(model, x)?;
    let f = model.evaluate(&natural_unchecked(model.parameters(), x));
    if !f.is_finite() {
        return Err(Error::Evaluation {
            location: format_point(x),
            detail: format!("value {f}"),
        });
    }
    Ok(f)
}

pub fn grad_normalized(model: &dyn Model, x: &[f64]) -> Result<Vec<f64>> {
    check_len(model, x)?;
    let natural = natural_unchecked(model.parameters(), x);
    let g = scale_gradient(model.parameters(), model.gradient(&natural));
    check_gradient(x, g)
}

/// Value and normalized gradient at one point.
pub fn value_and_grad_normalized(model: &dyn Model, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(model, x)?;
    let natural = natural_unchecked(model.parameters(), x);
    let (f, g) = model.value_and_gradient(&natural);
    if !f.is_finite() {
        return Err(Error::Evaluation {
            location: format_point(x),
            detail: format!("value {f}"),
        });
    }
    let g = check_gradient(x, scale_gradient(model.parameters(), g))?;
    Ok((f, g))
}

fn scale_gradient(params: &[ParameterSpec], mut g: Vec<f64>) -> Vec<f64> {
    for (gi, p) in g.iter_mut().zip(params) {
        *gi *= p.half_width();
    }
    g
}

fn check_gradient(x: &[f64], g: Vec<f64>) -> Result<Vec<f64>> {
    if g.len() != x.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: g.len(),
        });
    }
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Evaluation {
            location: format_point(x),
            detail: format!("gradient component {i} = {v}"),
        });
    }
    Ok(g)
}
