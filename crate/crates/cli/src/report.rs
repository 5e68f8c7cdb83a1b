//! Sensitivity reports: assembly, JSON, and the aligned text table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use actscore::active::{normalize_metric, ranking, theorem_checks, TheoremReport};
use actscore::analysis::{MonteCarloMetrics, ReferenceMetrics};
use actscore::mc::MetricKind;
use actscore::{Model, ParameterSpec};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub name: String,
    pub parameters: Vec<ParameterSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub parameters: Vec<String>,
    pub values: Vec<f64>,
    /// Absent for quadrature references.
    pub standard_errors: Option<Vec<f64>>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// `|gamma_i| / ||gamma||`, in parameter order.
    pub normalized: Vec<f64>,
    /// Parameter names from most to least important.
    pub order: Vec<String>,
}

impl Ranking {
    pub fn from_values(names: &[String], values: &[f64]) -> Self {
        Self {
            normalized: normalize_metric(values),
            order: ranking(values)
                .into_iter()
                .map(|i| names[i].clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub config: RunConfig,
    pub model: ModelInfo,
    pub metrics: BTreeMap<MetricKind, MetricBlock>,
    pub eigenvalues: Vec<f64>,
    pub subspace_dim: usize,
    pub theorem_checks: TheoremReport,
    pub rankings: BTreeMap<MetricKind, Ranking>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub version: String,
}

fn model_info(model: &dyn Model, config: &RunConfig) -> ModelInfo {
    ModelInfo {
        name: config.model.name().to_string(),
        parameters: model.parameters().to_vec(),
    }
}

fn rankings(
    names: &[String],
    metrics: &BTreeMap<MetricKind, MetricBlock>,
) -> BTreeMap<MetricKind, Ranking> {
    metrics
        .iter()
        .map(|(&k, b)| (k, Ranking::from_values(names, &b.values)))
        .collect()
}

pub fn reference_report(
    model: &dyn Model,
    config: &RunConfig,
    reference: &ReferenceMetrics,
    subspace_dim: usize,
    warnings: Vec<String>,
) -> Result<SensitivityReport, CliError> {
    let names = model.parameter_names();
    let mut metrics = BTreeMap::new();
    for kind in MetricKind::ALL {
        metrics.insert(
            kind,
            MetricBlock {
                parameters: names.clone(),
                values: reference.metric(kind, subspace_dim)?,
                standard_errors: None,
                evaluations: reference.evaluations,
            },
        );
    }
    let checks = theorem_checks(
        &reference.subspace,
        &reference.nu,
        &reference.tau,
        reference.variance,
    )?;
    Ok(SensitivityReport {
        config: config.clone(),
        model: model_info(model, config),
        rankings: rankings(&names, &metrics),
        metrics,
        eigenvalues: reference.subspace.eigenvalues.clone(),
        subspace_dim,
        theorem_checks: checks,
        warnings,
        version: VERSION.to_string(),
    })
}

pub fn monte_carlo_report(
    model: &dyn Model,
    config: &RunConfig,
    run: &MonteCarloMetrics,
    warnings: Vec<String>,
) -> Result<SensitivityReport, CliError> {
    let names = model.parameter_names();
    let metrics: BTreeMap<MetricKind, MetricBlock> = run
        .estimates
        .iter()
        .map(|e| {
            (
                e.metric,
                MetricBlock {
                    parameters: names.clone(),
                    values: e.values.clone(),
                    standard_errors: Some(e.standard_errors.clone()),
                    evaluations: e.evaluations_used,
                },
            )
        })
        .collect();
    let checks = theorem_checks(
        &run.subspace,
        &run.get(MetricKind::Dgsm).values,
        &run.get(MetricKind::Tsi).values,
        run.variance,
    )?;
    Ok(SensitivityReport {
        config: config.clone(),
        model: model_info(model, config),
        rankings: rankings(&names, &metrics),
        metrics,
        eigenvalues: run.subspace.eigenvalues.clone(),
        subspace_dim: run.subspace_dim,
        theorem_checks: checks,
        warnings,
        version: VERSION.to_string(),
    })
}

impl SensitivityReport {
    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("reports contain only finite numbers");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("report: {e}")))
    }

    pub fn values(&self, kind: MetricKind) -> &[f64] {
        &self.metrics[&kind].values
    }

    /// Aligned table: one row per parameter, one column per metric.
    pub fn table(&self) -> String {
        let names: Vec<&str> = self
            .model
            .parameters
            .iter()
            .map(|p| p.name.as_str())
            .collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
        let heads = [
            "tau".to_string(),
            "nu".to_string(),
            "beta".to_string(),
            "w_1".to_string(),
            format!("alpha({})", self.subspace_dim),
        ];
        let mut out = String::new();
        let header = |out: &mut String| {
            let _ = write!(out, "{:<width$}", "Parameter");
            for h in &heads {
                let _ = write!(out, " {h:>10}");
            }
            out.push('\n');
            let _ = writeln!(out, "{}", "-".repeat(width + 11 * heads.len()));
        };
        header(&mut out);
        for (i, name) in names.iter().enumerate() {
            let _ = write!(out, "{name:<width$}");
            for kind in MetricKind::ALL {
                let _ = write!(out, " {:>10.4}", self.metrics[&kind].values[i]);
            }
            out.push('\n');
        }
        if self.metrics.values().any(|b| b.standard_errors.is_some()) {
            out.push_str("\nStandard errors (bootstrap)\n");
            header(&mut out);
            for (i, name) in names.iter().enumerate() {
                let _ = write!(out, "{name:<width$}");
                for kind in MetricKind::ALL {
                    let se = self.metrics[&kind]
                        .standard_errors
                        .as_ref()
                        .map_or(f64::NAN, |s| s[i]);
                    let _ = write!(out, " {se:>10.2e}");
                }
                out.push('\n');
            }
        }
        out.push_str("\nEigenvalues:");
        for l in &self.eigenvalues {
            let _ = write!(out, " {l:.4e}");
        }
        let _ = writeln!(out, "\nSubspace dimension: {}", self.subspace_dim);
        let violations = self.theorem_checks.violations().count();
        let _ = writeln!(
            out,
            "Bound checks: {} of {} hold",
            self.theorem_checks.checks.len() - violations,
            self.theorem_checks.checks.len()
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
