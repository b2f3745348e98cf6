mod common;

use common::rel;
use nehari_core::experiments::{
    self, box_study, classify_sweep, sweep, sweep_csv, write_report, BracketStatus, ExperimentConfig, NSystemMode,
    Report, SweepParam, Th2Options, SWEEP_HEADER,
};
use nehari_core::io::{read_field, sha256_hex};
use nehari_core::spectrum::Verdict;
use nehari_core::{GridSpec, SystemParams};
use std::f64::consts::PI;

fn medium(params: SystemParams) -> ExperimentConfig {
    ExperimentConfig::new(params).unwrap().with_grid(GridSpec::line(2048, 100.0).unwrap())
}

#[test]
fn ground_state_escapes_the_semitrivial_start() {
    // β = 2Λ with the single semi-trivial-plus-ε start
    let mut cfg = medium(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap());
    cfg.guesses = 1;
    let r = experiments::verify_th1(&cfg).unwrap();
    assert!((r.threshold - 0.5).abs() < 1e-8);
    let g = r.ground.as_ref().unwrap();
    assert!(g.converged && g.positive && !g.semi_trivial);
    assert!(r.gap.unwrap() > 0.0);
    assert!(r.passed, "{:?}", r.checks);
}

#[test]
fn regression_th1_energy() {
    let cfg = ExperimentConfig::new(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 10.0).unwrap()).unwrap();
    let r = experiments::verify_th1(&cfg).unwrap();
    assert!(rel(r.ground.unwrap().phi, 0.04415820807263349) <= 1e-6);
}

#[test]
fn regression_three_component_energy() {
    let p = SystemParams::star(0.5, 1, vec![1.0; 3], vec![10.0, 10.0]).unwrap();
    let r = experiments::verify_n_system(&ExperimentConfig::new(p).unwrap(), NSystemMode::BetaAboveThresholds).unwrap();
    assert!(r.passed, "{:?}", r.checks);
    assert!(rel(r.ground.unwrap().phi, 0.02279373174684339) <= 1e-6);
    // the sum of semi-trivial energies is the all-semi-trivial energy
    assert!(r.sum_identity_rel <= 1e-10);
    for t in &r.thresholds {
        assert!((t - 0.5).abs() < 1e-6);
    }
}

#[test]
fn uncoupled_three_component_system_has_no_positive_ground_state() {
    let p = SystemParams::star(0.5, 1, vec![1.0; 3], vec![0.0, 0.0]).unwrap();
    let r = experiments::verify_n_system(&medium(p), NSystemMode::BetaAboveThresholds).unwrap();
    assert!(!r.positive_ground_state_found);
    assert!(!r.passed);
}

#[test]
fn coupled_scaling_at_unit_frequencies() {
    // t solves 24 = 80t² + 48t for (V₂, V₂) with V₂ = 4/(1+x²)
    let t = (-48.0 + (48.0f64 * 48.0 + 4.0 * 80.0 * 24.0).sqrt()) / 160.0;
    let cfg = ExperimentConfig::new(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap()).unwrap();
    let opts = Th2Options {
        minimize: false,
        ..Th2Options::default()
    };
    let r = experiments::verify_th2(&cfg, &opts).unwrap();
    assert!((r.point.direct.t - t).abs() <= 1e-3);
    assert!(!r.beta_within_threshold);
    assert!(r.formula_consistency_rel <= 1e-8);
    assert!(r.max_discrepancy <= 1e-6);
    assert_eq!(r.bracket_status, BracketStatus::Located);
    assert!(r.lambda2_empirical.is_some());
    assert!(r.point.direct.phi_u0 < r.point.direct.phi_v2);
    assert!(rel(r.point.direct.phi_v2, 2.0 * PI) <= 1e-3);
}

#[test]
fn exploratory_system_never_asserts_existence() {
    let p = SystemParams::two_nlfs_fkdv(0.5, 1, [1.0; 3], [1.0, 2.0, 2.0]).unwrap();
    let r = experiments::explore_2nlfs_fkdv(&medium(p)).unwrap();
    assert!(!r.existence_asserted);
    assert_eq!(r.verdict, Some(Verdict::Saddle));
    assert!(r.reduced_form_rel.unwrap() <= 1e-10);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["existence_asserted"], false);
}

#[test]
fn artifacts_are_hashed_and_reports_reproduce() {
    let cfg = medium(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 4.0).unwrap());
    let mut r = experiments::verify_th1(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let json_path = write_report(&mut r, dir.path(), "th1", 0.5).unwrap();
    assert!(r.passed());
    assert_eq!(r.manifest.artifacts.len(), 6);
    for a in &r.manifest.artifacts {
        let bytes = std::fs::read(dir.path().join(&a.path)).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.path);
    }
    let (u, meta) = read_field(&dir.path().join("th1_ground_0.nhf")).unwrap();
    assert_eq!(meta.s, 0.5);
    assert_eq!(&u, r.state.as_ref().unwrap().component(0));

    // rerun from the manifest stored in the JSON
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(json_path).unwrap()).unwrap();
    let m = &json["manifest"];
    let again = ExperimentConfig {
        params: serde_json::from_value(m["params"].clone()).unwrap(),
        grid: serde_json::from_value(m["grid"].clone()).unwrap(),
        opts: serde_json::from_value(m["opts"].clone()).unwrap(),
        guesses: m["guesses"].as_u64().unwrap() as usize,
    };
    let r2 = experiments::verify_th1(&again).unwrap();
    assert_eq!(r2.ground.as_ref().unwrap().phi.to_bits(), r.ground.as_ref().unwrap().phi.to_bits());
    assert_eq!(r2.threshold.to_bits(), r.threshold.to_bits());
    assert_eq!(r2.phi_semitrivial.to_bits(), r.phi_semitrivial.to_bits());
}

#[test]
fn sweep_over_beta_lowers_the_ground_energy() {
    let cfg = medium(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap());
    let rows = sweep(&cfg, SweepParam::Beta, &[1.0, 2.0, 5.0]).unwrap();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[1].phi_ground < w[0].phi_ground);
    }
    assert!(rows.iter().all(|r| r.saddle && r.gap > 0.0));
    let csv = sweep_csv(&rows);
    assert_eq!(csv.lines().next().unwrap(), SWEEP_HEADER);
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn classification_flips_at_the_threshold() {
    let g = GridSpec::line(1024, 60.0).unwrap();
    let p = SystemParams::two_eq(0.5, 1, 1.0, 1.0, 0.0).unwrap();
    let rows = classify_sweep(&p, g, &[0.25, 0.5, 0.75]).unwrap();
    assert_eq!(rows[0].1, Some(Verdict::StrictMin));
    assert_eq!(rows[1].1, None);
    assert_eq!(rows[2].1, Some(Verdict::Saddle));
}

#[test]
fn box_study_converges() {
    let rows = box_study(1.0, 1.0, 0.1, &[20.0, 40.0]).unwrap();
    // V₂ = 3 sech²(x/2) and ∫9 sech⁴(x/2) = 24; exponential tails make small boxes enough
    for r in &rows {
        assert!(rel(r.int_p2, 24.0) <= 1e-6, "{}", r.int_p2);
    }
}

#[test]
fn self_check_passes_for_several_seeds() {
    for seed in [0, 1, 2] {
        let checks = experiments::self_check(seed).unwrap();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}

#[test]
fn variant_mismatch_is_reported() {
    let p = SystemParams::star(0.5, 1, vec![1.0; 3], vec![1.0, 1.0]).unwrap();
    assert!(experiments::verify_th1(&medium(p)).is_err());
}

#[test]
fn two_dimensional_smoke() {
    let p = SystemParams::two_eq(0.75, 2, 1.0, 1.0, 10.0).unwrap();
    let mut cfg = ExperimentConfig::new(p).unwrap();
    cfg.grid = GridSpec::new(2, 256, 40.0, nehari_core::SymbolKind::Continuum).unwrap();
    cfg.opts.tol = 1e-6;
    cfg.guesses = 1;
    let r = experiments::verify_th1(&cfg).unwrap();
    let g = r.ground.as_ref().unwrap();
    assert!(g.converged && g.positive && !g.semi_trivial, "{:?}", r.checks);
    assert!(r.gap.unwrap() > 0.0);
}
