use actscore::active::{
    activity_scores, first_eigenvector, select_dimension, summary_plot_data, theorem_checks, Bound,
};
use actscore::analysis::{monte_carlo_metrics, reference_metrics, McSettings, ReferenceMetrics};
use actscore::benchmarks::BenchmarkId;
use actscore::bootstrap::{bootstrap_eigvec_se, bootstrap_se, BootstrapConfig};
use actscore::mc::{dgsm_printed_se, dgsm_statistic, mc_c_matrix, mc_dgsm, MetricKind, Stream};
use actscore::model::{eval_normalized, grad_normalized};
use actscore::quad::{gauss_legendre, tensor_integrate, Integrands, LegendreCoefficients};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn reference(id: BenchmarkId) -> &'static ReferenceMetrics {
    static PISTON: OnceLock<ReferenceMetrics> = OnceLock::new();
    static CIRCUIT: OnceLock<ReferenceMetrics> = OnceLock::new();
    let cell = match id {
        BenchmarkId::Piston => &PISTON,
        BenchmarkId::Circuit => &CIRCUIT,
    };
    cell.get_or_init(|| reference_metrics(id.build().as_ref(), 7, 0).unwrap())
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for id in BenchmarkId::ALL {
        let model = id.build();
        let m = model.dim();
        for _ in 0..100 {
            // Stay a step away from the faces so central differences fit.
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.999..0.999)).collect();
            let g = grad_normalized(model.as_ref(), &x).unwrap();
            for i in 0..m {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (eval_normalized(model.as_ref(), &xp).unwrap()
                    - eval_normalized(model.as_ref(), &xm).unwrap())
                    / (2.0 * h);
                if g[i].abs() < 1e-12 {
                    assert!(fd.abs() < 1e-9, "{id} x={x:?} i={i}: {fd}");
                } else {
                    let rel = (fd - g[i]).abs() / g[i].abs();
                    // Roundoff in the difference quotient scales like eps |f| / (h |g_i|).
                    let f = eval_normalized(model.as_ref(), &x).unwrap().abs();
                    let noise = 1e-16 * f / (h * g[i].abs());
                    assert!(
                        rel < 1e-6 + 10.0 * noise,
                        "{id} x={x:?} i={i}: {rel:e} (noise {noise:e})"
                    );
                }
            }
        }
    }
}

#[test]
fn parseval_identity() {
    for id in BenchmarkId::ALL {
        let r = reference(id);
        let rel = (r.spectral_variance - r.variance).abs() / r.variance;
        assert!(rel < 1e-8, "{id}: {rel:e}");
    }
}

fn assert_tsi_agree(a: &ReferenceMetrics, b: &ReferenceMetrics, what: &str) {
    // Eight significant digits, measured against the largest index.
    let scale = b.tau.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    for (i, (x, y)) in a.tau.iter().zip(&b.tau).enumerate() {
        assert!((x - y).abs() <= 5e-9 * scale, "{what} tau[{i}]: {x} vs {y}");
    }
}

#[test]
fn piston_tsi_agrees_between_six_and_seven_points() {
    let model = BenchmarkId::Piston.build();
    let k6 = reference_metrics(model.as_ref(), 6, 0).unwrap();
    assert_tsi_agree(&k6, reference(BenchmarkId::Piston), "k=6 vs k=7");
}

#[test]
fn piston_tsi_converges_at_higher_order() {
    let model = BenchmarkId::Piston.build();
    let k9 = reference_metrics(model.as_ref(), 9, 0).unwrap();
    let k10 = reference_metrics(model.as_ref(), 10, 0).unwrap();
    assert_tsi_agree(&k9, &k10, "k=9 vs k=10");
}

#[test]
fn mean_and_variance_independent_of_threads() {
    let model = BenchmarkId::Circuit.build();
    let a = tensor_integrate(model.as_ref(), 5, Integrands::default(), 1).unwrap();
    let b = tensor_integrate(model.as_ref(), 5, Integrands::default(), 4).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.variance.to_bits(), b.variance.to_bits());
}

#[test]
fn coefficients_of_circuit_match_direct_projection() {
    let model = BenchmarkId::Circuit.build();
    let rule = gauss_legendre(4).unwrap();
    let pass = tensor_integrate(
        model.as_ref(),
        4,
        Integrands {
            keep_values: true,
            ..Integrands::default()
        },
        1,
    )
    .unwrap();
    let coeffs =
        LegendreCoefficients::from_grid_values(pass.values.as_ref().unwrap(), &rule, 6, 3).unwrap();
    assert!((coeffs.mean() - pass.mean).abs() < 1e-13);
}

#[test]
fn theorem_one_holds_with_equality_at_full_dimension() {
    for id in BenchmarkId::ALL {
        let r = reference(id);
        let report = theorem_checks(&r.subspace, &r.nu, &r.tau, r.variance).unwrap();
        assert!(report.all_hold(Bound::ActivityBelowDgsm), "{id}");
        assert!(
            report.full_dimension_gap <= 1e-10,
            "{id}: {:e}",
            report.full_dimension_gap
        );
    }
}

#[test]
fn both_benchmarks_select_one_dimension() {
    for id in BenchmarkId::ALL {
        assert_eq!(
            select_dimension(&reference(id).subspace).unwrap(),
            1,
            "{id}"
        );
    }
}

#[test]
fn leading_eigenvector_relative_signs() {
    let p = first_eigenvector(&reference(BenchmarkId::Piston).subspace);
    assert!((p[1].abs() - 0.7936).abs() < 5e-5 && (p[2].abs() - 0.5768).abs() < 5e-5);
    assert!(p[1] * p[2] < 0.0);
    let c = first_eigenvector(&reference(BenchmarkId::Circuit).subspace);
    assert!((c[0].abs() - 0.7407).abs() < 5e-5 && (c[1].abs() - 0.6112).abs() < 5e-5);
    assert!(c[0] * c[1] < 0.0);
}

#[test]
fn piston_activity_scores() {
    let sub = &reference(BenchmarkId::Piston).subspace;
    let a1 = activity_scores(sub, 1).unwrap().scores;
    assert!((a1[1] - 0.0437).abs() < 5e-5 && (a1[2] - 0.0231).abs() < 5e-5);
    // M ranks above k at n = 1 and below it at n = 2.
    let a2 = activity_scores(sub, 2).unwrap().scores;
    assert!(a1[0] > a1[3]);
    assert!(a2[0] < a2[3]);
}

#[test]
fn summary_plot_rows() {
    let piston = BenchmarkId::Piston.build();
    let sub = &reference(BenchmarkId::Piston).subspace;
    let rows = summary_plot_data(piston.as_ref(), sub, 500, 7, 0).unwrap();
    assert_eq!(rows.len(), 500);
    let bound = 7f64.sqrt();
    assert!(rows
        .iter()
        .all(|r| r.av1.abs() <= bound && r.av2.abs() <= bound));

    let circuit = BenchmarkId::Circuit.build();
    let rows = summary_plot_data(
        circuit.as_ref(),
        &reference(BenchmarkId::Circuit).subspace,
        500,
        7,
        0,
    )
    .unwrap();
    let n = rows.len() as f64;
    let (mx, my) = rows
        .iter()
        .fold((0.0, 0.0), |(a, b), r| (a + r.av1 / n, b + r.f / n));
    let sxy: f64 = rows.iter().map(|r| (r.av1 - mx) * (r.f - my)).sum();
    let sxx: f64 = rows.iter().map(|r| (r.av1 - mx).powi(2)).sum();
    let syy: f64 = rows.iter().map(|r| (r.f - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 > 0.95, "R^2 = {r2}");
}

#[test]
fn dgsm_bootstrap_tracks_closed_form() {
    let model = BenchmarkId::Piston.build();
    let m = model.dim();
    let run = mc_dgsm(model.as_ref(), 5000, 99, 0).unwrap();
    let grads = run.gradients();
    let cfg = BootstrapConfig::new(100, 99).unwrap();
    let boot = bootstrap_se(5000, &cfg, Stream::BootDgsm, 0, |idx| {
        Ok(dgsm_statistic(grads, m, idx))
    })
    .unwrap();
    let printed = dgsm_printed_se(grads, m, &run.estimate.values);
    for i in 0..m {
        let closed = printed[i] / 5000f64.sqrt();
        let ratio = boot[i] / closed;
        assert!((1.0 / 1.3..=1.3).contains(&ratio), "i={i}: ratio {ratio}");
    }
}

#[test]
fn piston_eigenvector_bootstrap_is_tight_at_large_m() {
    let model = BenchmarkId::Piston.build();
    let (c, batch) = mc_c_matrix(model.as_ref(), 50000, 5, 0).unwrap();
    let sub = actscore::active::ActiveSubspace::from_matrix(
        &c,
        actscore::active::SubspaceSource::MonteCarlo {
            seed: 5,
            samples: 50000,
        },
    )
    .unwrap();
    let w1 = first_eigenvector(&sub);
    let cfg = BootstrapConfig::new(100, 5).unwrap();
    let se = bootstrap_eigvec_se(batch.gradients.as_ref().unwrap(), 7, 1, &w1, &cfg, 0).unwrap();
    assert!(se.eigvec_se[1] < 0.01, "{}", se.eigvec_se[1]);
}

#[test]
fn circuit_tsi_within_three_standard_errors() {
    let model = BenchmarkId::Circuit.build();
    let s = McSettings {
        samples: 50000,
        seed: 42,
        bootstrap: 100,
        subspace_dim: None,
        threads: 0,
    };
    let run = monte_carlo_metrics(model.as_ref(), &s).unwrap();
    let tsi = run.get(MetricKind::Tsi);
    assert!(
        (tsi.values[0] - 0.5001).abs() < 3.0 * tsi.standard_errors[0],
        "{tsi:?}"
    );
    assert_eq!(tsi.evaluations_used, 50000 / 7 * 7);
}

#[test]
fn too_few_samples_for_piston() {
    let model = BenchmarkId::Piston.build();
    let s = McSettings {
        samples: 10,
        seed: 1,
        bootstrap: 100,
        subspace_dim: None,
        threads: 1,
    };
    assert_eq!(
        monte_carlo_metrics(model.as_ref(), &s).unwrap_err().tag(),
        "precondition"
    );
}
