//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{dense_generalized_min, dense_operator, dense_shifted_min, rel, rel_linf, smooth_field};
use nehari_core::experiments::{self, ExperimentConfig, NSystemMode, Th2Options};
use nehari_core::model::{energy_phi, gradient_phi, nehari_psi};
use nehari_core::nehari::project_to_nehari;
use nehari_core::scalar_gs::{self, closed_form, moment_identity_check, solve_scalar_u, solve_scalar_v};
use nehari_core::spectral::{integral_power, Field, GridSpec};
use nehari_core::spectrum::{classify_with, lambda_threshold, Verdict};
use nehari_core::{CoupledState, SolveOptions, SystemParams};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fine_grid() -> GridSpec {
    GridSpec::line(8192, 200.0).unwrap()
}

/// Benjamin–Ono profile at s = 1/2.
fn criterion_1() -> Outcome {
    // oracle: |D|Q = 2(1−x²)/(1+x²)² (from the transform π e^{−|k|} of
    // 1/(1+x²)) equals Q² − Q for Q = 2/(1+x²)
    let oracle_defect = (0..200)
        .map(|i| {
            let x = -20.0 + 0.2 * i as f64;
            let q = closed_form::benjamin_ono(x);
            let dq = 2.0 * (1.0 - x * x) / (1.0 + x * x).powi(2);
            (dq + q - q * q).abs()
        })
        .fold(0.0, f64::max);
    if oracle_defect > 1e-14 {
        return Err(format!("closed form fails its own equation by {oracle_defect:e}"));
    }
    let g = fine_grid();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let clock = Instant::now();
    let v = pool
        .install(|| solve_scalar_v(0.5, 1.0, 1.0, g, &SolveOptions::default()))
        .map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed();
    let exact = Field::from_fn(g, |x| closed_form::benjamin_ono(x[0])).unwrap();
    let err = rel_linf(&v, &exact);
    ensure(
        err <= 1e-3 && elapsed <= Duration::from_secs(30),
        format!("L∞ relative error {err:.3e} (limit 1e-3), {:.2} s single-threaded (limit 30 s)", elapsed.as_secs_f64()),
    )
}

/// Classical solitons at s = 1.
fn criterion_2() -> Outcome {
    // oracles: w = (3/2)sech²(x/2) has w″ = w − w², and u = √2 sech x has
    // u″ = u − u³; checked with a fourth-order difference of the closed forms
    let d2 = |f: fn(f64) -> f64, x: f64| {
        let h = 1e-3;
        (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
    };
    let defect = (0..100)
        .map(|i| {
            let x = -10.0 + 0.2 * i as f64;
            let (w, u) = (closed_form::kdv(x), closed_form::nls(x));
            (d2(closed_form::kdv, x) - (w - w * w)).abs().max((d2(closed_form::nls, x) - (u - u * u * u)).abs())
        })
        .fold(0.0, f64::max);
    if defect > 1e-8 {
        return Err(format!("closed forms fail their equations by {defect:e}"));
    }
    let g = GridSpec::line(2048, 80.0).unwrap();
    let opts = SolveOptions::default();
    let v = solve_scalar_v(1.0, 1.0, 1.0, g, &opts).map_err(|e| e.to_string())?;
    let u = solve_scalar_u(1.0, 1.0, g, &opts).map_err(|e| e.to_string())?;
    let ev = rel_linf(&v, &Field::from_fn(g, |x| closed_form::kdv(x[0])).unwrap());
    let eu = rel_linf(&u, &Field::from_fn(g, |x| closed_form::nls(x[0])).unwrap());
    ensure(
        ev <= 1e-4 && eu <= 1e-4,
        format!("quadratic {ev:.3e}, cubic {eu:.3e} (limit 1e-4)"),
    )
}

/// Φ(𝐯₂) = 2π and its reduced form.
fn criterion_3() -> Outcome {
    let expected = 24.0 * PI / 12.0;
    let g = fine_grid();
    let v2 = scalar_gs::quadratic_ground_state(0.5, 1.0, g).map_err(|e| e.to_string())?;
    let p = SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap();
    let e = energy_phi(&p, &CoupledState::new(vec![Field::zeros(g), v2.clone()]).unwrap()).unwrap();
    let err = rel(e.phi, expected);
    let internal = rel(e.phi, integral_power(&v2, 3) / 12.0);
    ensure(
        err <= 1e-3 && internal <= 1e-10,
        format!("Phi(v2) = {:.9}, error vs 2π {err:.3e} (limit 1e-3); vs ∫V₂³/12 {internal:.3e} (limit 1e-10)", e.phi),
    )
}

/// Moment identity under the scaling of V. The widest profile (λ₂ = 1/2)
/// needs twice the box of criterion 1 at the same spacing: the periodic
/// images of the algebraic tails cost O((width/L)²).
fn criterion_4() -> Outcome {
    let g = GridSpec::line(16384, 400.0).unwrap();
    let v = scalar_gs::unit_ground_state(0.5, g).map_err(|e| e.to_string())?;
    let (mut solved, mut interp): (f64, f64) = (0.0, 0.0);
    for lambda2 in [0.5, 1.0, 2.0, 4.0] {
        let v2 = scalar_gs::quadratic_ground_state(0.5, lambda2, g).map_err(|e| e.to_string())?;
        for r in [2u32, 3, 4] {
            let rhs = 2f64.powi(r as i32) * lambda2.powf(r as f64 - 1.0) * integral_power(&v, r);
            solved = solved.max(rel(integral_power(&v2, r), rhs));
            let (lhs, rhs2) = moment_identity_check(&v, lambda2, 0.5, r).map_err(|e| e.to_string())?;
            interp = interp.max(rel(lhs, rhs2));
        }
    }
    ensure(
        solved <= 1e-3 && interp <= 1e-6,
        format!("independently solved V₂: {solved:.3e} (limit 1e-3); interpolated V₂: {interp:.3e} (limit 1e-6)"),
    )
}

/// Nehari projection on random states and the (V₂, V₂) root.
fn criterion_5() -> Outcome {
    let mut rng = common::rng(5);
    let g = GridSpec::line(256, 40.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let beta = rng.gen_range(-2.0..10.0);
        let p = SystemParams::two_eq(rng.gen_range(0.3..1.0), 1, rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0), beta)
            .unwrap();
        let u = smooth_field(g, &mut rng);
        let v = if i % 4 == 0 { Field::zeros(g) } else { smooth_field(g, &mut rng) };
        let (_, proj) = project_to_nehari(&p, &CoupledState::new(vec![u, v]).unwrap()).map_err(|e| e.to_string())?;
        let norm = energy_phi(&p, &proj).unwrap().norm_sq();
        worst = worst.max(nehari_psi(&p, &proj).unwrap().abs() / norm);
    }
    // oracle: 24 = 80t² + 48t from ∫V₂⁴ = 80π, ∫V₂³ = 24π, ‖(V₂,V₂)‖² = 24π
    let t_exact = (-48.0 + (48.0f64 * 48.0 + 4.0 * 80.0 * 24.0).sqrt()) / 160.0;
    let fine = fine_grid();
    let v2 = scalar_gs::quadratic_ground_state(0.5, 1.0, fine).map_err(|e| e.to_string())?;
    let p = SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap();
    let (t, _) = project_to_nehari(&p, &CoupledState::new(vec![v2.clone(), v2]).unwrap()).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-10 && (t - t_exact).abs() <= 1e-3,
        format!("max |Ψ|/‖u‖² {worst:.3e} over 1000 states (limit 1e-10); t = {t:.6} vs {t_exact:.6}"),
    )
}

/// Directional derivatives against central differences.
fn criterion_6() -> Outcome {
    let mut rng = common::rng(6);
    let g = GridSpec::line(256, 40.0).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let s = rng.gen_range(0.3..1.0);
        let p = match i % 3 {
            0 => SystemParams::two_eq(s, 1, 1.0, 1.5, rng.gen_range(-3.0..3.0)).unwrap(),
            1 => SystemParams::star(s, 1, vec![1.0, 0.7, 1.3], vec![2.0, -1.0]).unwrap(),
            _ => SystemParams::two_nlfs_fkdv(s, 1, [1.0, 0.8, 1.2], [0.5, 2.0, -1.5]).unwrap(),
        };
        let m = p.components();
        let state = CoupledState::new((0..m).map(|_| smooth_field(g, &mut rng)).collect()).unwrap();
        let h = CoupledState::new((0..m).map(|_| smooth_field(g, &mut rng)).collect()).unwrap();
        let grad = gradient_phi(&p, &state).unwrap();
        let analytic = grad.inner_l2(&h).unwrap();
        let plus = energy_phi(&p, &state.lin_comb(1.0, &h, eps).unwrap()).unwrap().phi;
        let minus = energy_phi(&p, &state.lin_comb(1.0, &h, -eps).unwrap()).unwrap().phi;
        let fd = (plus - minus) / (2.0 * eps);
        worst = worst.max((fd - analytic).abs() / analytic.abs());
    }
    ensure(worst <= 1e-6, format!("max relative error {worst:.3e} over 100 states, 3 variants (limit 1e-6)"))
}

/// Threshold against the dense oracle and the classification sign flip.
fn criterion_7() -> Outcome {
    let g = GridSpec::line(256, 60.0).unwrap();
    let mut details = Vec::new();
    let mut worst: f64 = 0.0;
    let mut flip_err: f64 = 0.0;
    for (lambda1, lambda2) in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)] {
        let v2 = scalar_gs::quadratic_ground_state(0.5, lambda2, g).map_err(|e| e.to_string())?;
        let a = dense_operator(g, 0.5, lambda1);
        let dense = dense_generalized_min(&a, v2.values());
        let t = lambda_threshold(0.5, lambda1, &v2, g).map_err(|e| e.to_string())?;
        worst = worst.max(rel(t.lambda, dense));

        // sign flip of the dense h₁ block and of the verdict under a β sweep
        let p = SystemParams::two_eq(0.5, 1, lambda1, lambda2, 0.0).unwrap();
        let betas: Vec<f64> = (0..=40).map(|i| dense * (0.9 + 0.005 * i as f64)).collect();
        let dense_flip = betas
            .iter()
            .find(|&&b| dense_shifted_min(&a, v2.values(), b) < 0.0)
            .copied()
            .ok_or("dense h1 block never turns negative")?;
        let verdict_flip = betas
            .iter()
            .find(|&&b| matches!(classify_with(&p, b, &v2, &t, 0), Ok(c) if c.verdict == Verdict::Saddle))
            .copied()
            .ok_or("verdict never becomes saddle")?;
        flip_err = flip_err.max(rel(dense_flip, t.lambda)).max(rel(verdict_flip, t.lambda));
        details.push(format!("Λ({lambda1},{lambda2}) = {:.9}", t.lambda));
    }
    ensure(
        worst <= 1e-6 && flip_err <= 0.02,
        format!(
            "{}; vs dense {worst:.3e} (limit 1e-6); sign flip offset {flip_err:.3e} (limit 2e-2)",
            details.join(", ")
        ),
    )
}

/// Ground state for β = 10.
fn criterion_8() -> Outcome {
    let clock = Instant::now();
    let cfg = ExperimentConfig::new(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 10.0).unwrap()).unwrap();
    let r = experiments::verify_th1(&cfg).map_err(|e| e.to_string())?;
    let elapsed = clock.elapsed();
    let g = r.ground.as_ref().ok_or("no converged state")?;
    let ok = g.converged
        && g.positive
        && g.symmetric
        && g.el_residual <= 1e-6
        && g.phi < 2.0 * PI
        && elapsed <= Duration::from_secs(300);
    ensure(
        ok,
        format!(
            "Phi = {:.12}, converged {}, positive {}, even {}, EL residual {:.3e}, {:.1} s",
            g.phi,
            g.converged,
            g.positive,
            g.symmetric,
            g.el_residual,
            elapsed.as_secs_f64()
        ),
    )
}

/// Coupled scaling t(V₂, V₂) and the inequality across λ₂.
fn criterion_9() -> Outcome {
    // oracle: Φ(𝐮₀) = 4πt² + (20π/3)t⁴ with t from 24 = 80t² + 48t
    let t = (-6.0 + 156f64.sqrt()) / 20.0;
    let expected = 4.0 * PI * t * t + 20.0 * PI / 3.0 * t.powi(4);
    let cfg = ExperimentConfig::new(SystemParams::two_eq(0.5, 1, 1.0, 1.0, 1.0).unwrap()).unwrap();
    let opts = Th2Options {
        minimize: false,
        ..Th2Options::default()
    };
    let r = experiments::verify_th2(&cfg, &opts).map_err(|e| e.to_string())?;
    let err = rel(r.point.direct.phi_u0, expected);
    ensure(
        err <= 1e-3 && r.point.direct.phi_u0 < 2.0 * PI && r.max_discrepancy <= 1e-6,
        format!(
            "Phi(u0) = {:.6} vs {expected:.6} ({err:.3e}); direct vs rescaled {:.3e} over {} values of λ₂ (limit 1e-6)",
            r.point.direct.phi_u0,
            r.max_discrepancy,
            r.sweep.len() + 1
        ),
    )
}

/// Three-component system.
fn criterion_10() -> Outcome {
    let p = SystemParams::star(0.5, 1, vec![1.0; 3], vec![10.0, 10.0]).unwrap();
    let cfg = ExperimentConfig::new(p).unwrap();
    let r = experiments::verify_n_system(&cfg, NSystemMode::BetaAboveThresholds).map_err(|e| e.to_string())?;
    let g = r.ground.as_ref().ok_or("no converged state")?;
    let min_semi = r.semitrivial.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        r.sum_identity_rel <= 1e-10 && r.positive_ground_state_found && g.phi < min_semi,
        format!(
            "sum identity {:.3e} (limit 1e-10); Phi = {:.12} vs min semi-trivial {min_semi:.9}; all positive {}",
            r.sum_identity_rel, g.phi, r.positive_ground_state_found
        ),
    )
}

/// Invariant suites of `check`.
fn criterion_11() -> Outcome {
    let checks = experiments::self_check(0).map_err(|e| e.to_string())?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    ensure(
        failed.is_empty(),
        format!("{} suites, failed: {:?}", checks.len(), failed),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("scalar oracle s = 1/2", criterion_1),
        ("scalar oracles s = 1", criterion_2),
        ("semi-trivial energy", criterion_3),
        ("moment identity", criterion_4),
        ("Nehari projection", criterion_5),
        ("gradient correctness", criterion_6),
        ("threshold and classification", criterion_7),
        ("ground state above the threshold", criterion_8),
        ("coupled scaling for large lambda2", criterion_9),
        ("three-component ordering", criterion_10),
        ("invariant suites", criterion_11),
    ];
    // `cargo test -- <filter>` passes arguments; honour a plain substring filter
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {}: {name}", i + 1);
        if filter.as_ref().is_some_and(|f| !label.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {label} ({detail})"),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] {label} ({detail})");
            }
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
