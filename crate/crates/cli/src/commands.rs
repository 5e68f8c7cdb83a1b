//! The four subcommands. Each writes its files under the output directory
//! and returns a short text rendering for the terminal.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use actscore::active::{activity_score_sweep, select_dimension, summary_plot_data};
use actscore::analysis::{
    convergence_study, default_sample_grid, min_samples, monte_carlo_metrics, reference_metrics,
    ConvergenceStudy, McSettings, ReferenceMetrics,
};
use actscore::mc::MetricKind;
use actscore::Model;

use crate::config::{
    resolve, CommandDefaults, Flags, Method, Resolved, DEFAULT_CONVERGE_TRIALS, DEFAULT_SAMPLES,
    DEFAULT_SUMMARY_SAMPLES,
};
use crate::csv::{self, num};
use crate::report::{monte_carlo_report, reference_report, Ranking, SensitivityReport};
use crate::CliError;

/// Below this many points per dimension reference values are visibly
/// unconverged for both benchmarks.
const MIN_CONVERGED_POINTS: usize = 5;

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn quad_warnings(k: usize) -> Vec<String> {
    if k < MIN_CONVERGED_POINTS {
        vec![format!(
            "only {k} quadrature points per dimension; reference values may not be converged (use at least {MIN_CONVERGED_POINTS})"
        )]
    } else {
        Vec::new()
    }
}

fn reference_for(cfg: &Resolved, model: &dyn Model) -> Result<(ReferenceMetrics, usize), CliError> {
    let reference = reference_metrics(model, cfg.run.quad_points, cfg.threads)?;
    let n = match cfg.run.subspace_dim {
        Some(n) => n,
        None => select_dimension(&reference.subspace)?,
    };
    Ok((reference, n))
}

/// Compute the quadrature reference report without touching the disk.
pub fn reference_report_for(cfg: &Resolved) -> Result<SensitivityReport, CliError> {
    let model = cfg.run.model.build();
    let (reference, n) = reference_for(cfg, model.as_ref())?;
    reference_report(
        model.as_ref(),
        &cfg.run,
        &reference,
        n,
        quad_warnings(cfg.run.quad_points),
    )
}

fn emit_report(cfg: &Resolved, report: &SensitivityReport) -> Result<String, CliError> {
    prepare_out(&cfg.out)?;
    let table = report.table();
    write_text(&cfg.out.join("report.json"), &report.to_json())?;
    write_text(&cfg.out.join("table.txt"), &table)?;
    Ok(table)
}

pub fn refvals(flags: &Flags) -> Result<String, CliError> {
    let cfg = resolve(
        flags,
        CommandDefaults {
            method: Method::Quadrature,
            samples: DEFAULT_SAMPLES,
            trials: 1,
        },
    )?;
    let report = reference_report_for(&cfg)?;
    emit_report(&cfg, &report)
}

fn mc_settings(cfg: &Resolved) -> McSettings {
    McSettings {
        samples: cfg.run.mc_samples,
        seed: cfg.run.seed,
        bootstrap: cfg.run.bootstrap_replicates,
        subspace_dim: cfg.run.subspace_dim,
        threads: cfg.threads,
    }
}

/// Compute the Monte Carlo report without touching the disk.
pub fn analyze_report_for(cfg: &Resolved) -> Result<SensitivityReport, CliError> {
    let model = cfg.run.model.build();
    let run = monte_carlo_metrics(model.as_ref(), &mc_settings(cfg))?;
    monte_carlo_report(model.as_ref(), &cfg.run, &run, Vec::new())
}

pub fn analyze(flags: &Flags) -> Result<String, CliError> {
    let cfg = resolve(
        flags,
        CommandDefaults {
            method: Method::Montecarlo,
            samples: DEFAULT_SAMPLES,
            trials: 1,
        },
    )?;
    let report = analyze_report_for(&cfg)?;
    emit_report(&cfg, &report)
}

/// Run the convergence study without touching the disk.
pub fn convergence_for(cfg: &Resolved) -> Result<ConvergenceStudy, CliError> {
    let model = cfg.run.model.build();
    let grid = cfg
        .run
        .sample_grid
        .clone()
        .unwrap_or_else(default_sample_grid);
    let floor = min_samples(model.dim());
    if let Some(&bad) = grid.iter().find(|&&s| s < floor) {
        return Err(CliError::Core(actscore::Error::Precondition(format!(
            "sample size {bad} in the grid is below the minimum {floor}"
        ))));
    }
    let (reference, n) = reference_for(cfg, model.as_ref())?;
    let settings = McSettings {
        subspace_dim: Some(n),
        ..mc_settings(cfg)
    };
    Ok(convergence_study(
        model.as_ref(),
        &reference,
        &grid,
        cfg.run.trials,
        &settings,
    )?)
}

pub fn write_convergence(
    dir: &Path,
    names: &[String],
    study: &ConvergenceStudy,
) -> Result<(), CliError> {
    prepare_out(dir)?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                r.metric.name().to_string(),
                names[r.parameter].clone(),
                r.samples.to_string(),
                num(r.rel_error),
                num(r.std_error),
            ]
        })
        .collect();
    csv::write(
        &dir.join("converge.csv"),
        &["metric", "parameter", "M", "rel_error", "std_error"],
        &rows,
    )?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let slopes: Vec<Vec<String>> = study
        .slopes
        .iter()
        .map(|s| {
            vec![
                s.metric.name().to_string(),
                opt(s.error_slope),
                opt(s.se_slope),
            ]
        })
        .collect();
    csv::write(
        &dir.join("slopes.csv"),
        &["metric", "error_slope", "std_error_slope"],
        &slopes,
    )
}

pub fn converge(flags: &Flags) -> Result<String, CliError> {
    let cfg = resolve(
        flags,
        CommandDefaults {
            method: Method::Montecarlo,
            samples: DEFAULT_SAMPLES,
            trials: DEFAULT_CONVERGE_TRIALS,
        },
    )?;
    let study = convergence_for(&cfg)?;
    let names = cfg.run.model.build().parameter_names();
    write_convergence(&cfg.out, &names, &study)?;
    let mut out = format!(
        "{} trials over M = {:?}, activity scores at n = {}\n{:<16} {:>12} {:>12}\n",
        study.trials, study.grid, study.subspace_dim, "metric", "error slope", "SE slope"
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
    for s in &study.slopes {
        let _ = writeln!(
            out,
            "{:<16} {:>12} {:>12}",
            s.metric.name(),
            fmt(s.error_slope),
            fmt(s.se_slope)
        );
    }
    Ok(out)
}

pub fn summary(flags: &Flags) -> Result<String, CliError> {
    let cfg = resolve(
        flags,
        CommandDefaults {
            method: Method::Quadrature,
            samples: DEFAULT_SUMMARY_SAMPLES,
            trials: 1,
        },
    )?;
    let model = cfg.run.model.build();
    let names = model.parameter_names();
    let (reference, n) = reference_for(&cfg, model.as_ref())?;
    let rows = summary_plot_data(
        model.as_ref(),
        &reference.subspace,
        cfg.run.mc_samples,
        cfg.run.seed,
        cfg.threads,
    )?;
    let dir = &cfg.out;
    prepare_out(dir)?;

    csv::write(
        &dir.join("summary.csv"),
        &["av1", "av2", "f"],
        &rows
            .iter()
            .map(|r| vec![num(r.av1), num(r.av2), num(r.f)])
            .collect::<Vec<_>>(),
    )?;
    csv::write(
        &dir.join("eigenvalues.csv"),
        &["index", "eigenvalue"],
        &reference
            .subspace
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(j, l)| vec![(j + 1).to_string(), num(*l)])
            .collect::<Vec<_>>(),
    )?;
    let mut header = vec!["n"];
    header.extend(names.iter().map(String::as_str));
    csv::write(
        &dir.join("activity_scores.csv"),
        &header,
        &activity_score_sweep(&reference.subspace)
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let mut row = vec![(j + 1).to_string()];
                row.extend(a.iter().copied().map(num));
                row
            })
            .collect::<Vec<_>>(),
    )?;
    let mut rank_rows = Vec::new();
    let mut text = format!(
        "Normalized metrics (activity scores at n = {n})\n{:<16}",
        "metric"
    );
    for name in &names {
        let _ = write!(text, " {name:>8}");
    }
    text.push('\n');
    for kind in MetricKind::ALL {
        let values = reference.metric(kind, n)?;
        let r = Ranking::from_values(&names, &values);
        let _ = write!(text, "{:<16}", kind.name());
        for v in &r.normalized {
            let _ = write!(text, " {v:>8.4}");
        }
        text.push('\n');
        for (i, name) in names.iter().enumerate() {
            let rank = 1 + r
                .order
                .iter()
                .position(|o| o == name)
                .expect("every name is ranked");
            rank_rows.push(vec![
                kind.name().to_string(),
                name.clone(),
                num(r.normalized[i]),
                rank.to_string(),
            ]);
        }
    }
    csv::write(
        &dir.join("rankings.csv"),
        &["metric", "parameter", "normalized", "rank"],
        &rank_rows,
    )?;
    let _ = writeln!(
        text,
        "wrote {} summary rows, eigenvalues, activity scores and rankings to {}",
        rows.len(),
        dir.display()
    );
    Ok(text)
}
