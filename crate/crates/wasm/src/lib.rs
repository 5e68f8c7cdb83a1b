//! Browser entry points. Each export takes plain numbers and strings and
//! returns a JSON document for the demo page to draw.

use actscore::active::{
    activity_score_sweep, first_eigenvector, select_dimension, summary_plot_data,
};
use actscore::analysis::{monte_carlo_metrics, reference_metrics, McSettings, ReferenceMetrics};
use actscore::benchmarks::BenchmarkId;
use actscore::mc::MetricKind;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Quadrature points used for every reference in the demo.
const DEMO_QUAD_POINTS: usize = 7;

#[derive(Debug, Serialize)]
pub struct ReferenceView {
    pub model: String,
    pub parameters: Vec<String>,
    pub eigenvalues: Vec<f64>,
    pub subspace_dim: usize,
    pub tau: Vec<f64>,
    pub nu: Vec<f64>,
    pub beta: Vec<f64>,
    pub w1: Vec<f64>,
    /// `activity[n - 1][i] = alpha_i(n)`.
    pub activity: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct EstimateView {
    pub metric: MetricKind,
    pub values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub reference: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloView {
    pub parameters: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    pub estimates: Vec<EstimateView>,
}

#[derive(Debug, Serialize)]
pub struct SummaryView {
    pub eigenvalues: Vec<f64>,
    pub av1: Vec<f64>,
    pub av2: Vec<f64>,
    pub f: Vec<f64>,
}

fn model_id(name: &str) -> actscore::Result<BenchmarkId> {
    name.parse()
}

fn reference(id: BenchmarkId) -> actscore::Result<ReferenceMetrics> {
    reference_metrics(id.build().as_ref(), DEMO_QUAD_POINTS, 1)
}

pub fn reference_view(name: &str) -> actscore::Result<ReferenceView> {
    let id = model_id(name)?;
    let r = reference(id)?;
    Ok(ReferenceView {
        model: id.name().to_string(),
        parameters: id.build().parameter_names(),
        eigenvalues: r.subspace.eigenvalues.clone(),
        subspace_dim: select_dimension(&r.subspace)?,
        w1: first_eigenvector(&r.subspace),
        activity: activity_score_sweep(&r.subspace),
        tau: r.tau,
        nu: r.nu,
        beta: r.beta,
    })
}

/// Monte Carlo estimates beside the references. Eigenvector estimates are
/// sign-aligned with the reference so the two can be drawn together.
pub fn monte_carlo_view(
    name: &str,
    samples: usize,
    seed: u64,
    bootstrap: usize,
) -> actscore::Result<MonteCarloView> {
    let id = model_id(name)?;
    let model = id.build();
    let r = reference(id)?;
    let n = select_dimension(&r.subspace)?;
    let run = monte_carlo_metrics(
        model.as_ref(),
        &McSettings {
            samples,
            seed,
            bootstrap,
            subspace_dim: Some(n),
            threads: 1,
        },
    )?;
    let mut estimates = Vec::new();
    for kind in MetricKind::ALL {
        let est = run.get(kind);
        let reference = r.metric(kind, n)?;
        let mut values = est.values.clone();
        if kind == MetricKind::Eigvec1
            && values
                .iter()
                .zip(&reference)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                < 0.0
        {
            values.iter_mut().for_each(|v| *v = -*v);
        }
        estimates.push(EstimateView {
            metric: kind,
            values,
            standard_errors: est.standard_errors.clone(),
            reference,
            evaluations: est.evaluations_used,
        });
    }
    Ok(MonteCarloView {
        parameters: model.parameter_names(),
        samples,
        seed,
        estimates,
    })
}

pub fn summary_view(name: &str, samples: usize, seed: u64) -> actscore::Result<SummaryView> {
    let id = model_id(name)?;
    let model = id.build();
    let r = reference(id)?;
    let rows = summary_plot_data(model.as_ref(), &r.subspace, samples, seed, 1)?;
    Ok(SummaryView {
        eigenvalues: r.subspace.eigenvalues.clone(),
        av1: rows.iter().map(|p| p.av1).collect(),
        av2: rows.iter().map(|p| p.av2).collect(),
        f: rows.iter().map(|p| p.f).collect(),
    })
}

fn to_js<T: Serialize>(r: actscore::Result<T>) -> Result<String, JsError> {
    match r {
        Ok(v) => serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string())),
        Err(e) => Err(JsError::new(&format!("{}: {e}", e.tag()))),
    }
}

/// Reference metrics and activity scores for every subspace dimension.
#[wasm_bindgen]
pub fn reference_json(model: &str) -> Result<String, JsError> {
    to_js(reference_view(model))
}

/// All five Monte Carlo estimates with bootstrap standard errors.
#[wasm_bindgen]
pub fn monte_carlo_json(
    model: &str,
    samples: usize,
    seed: u32,
    bootstrap: usize,
) -> Result<String, JsError> {
    to_js(monte_carlo_view(model, samples, u64::from(seed), bootstrap))
}

/// Summary-plot samples projected on the first two eigenvectors.
#[wasm_bindgen]
pub fn summary_json(model: &str, samples: usize, seed: u32) -> Result<String, JsError> {
    to_js(summary_view(model, samples, u64::from(seed)))
}
