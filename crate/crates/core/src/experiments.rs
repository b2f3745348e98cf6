//! Theorem-level scenarios, parameter sweeps and the self-check suite.
//!
//! Every report embeds a [`RunManifest`] and a list of named [`Check`]s; a
//! failed check yields a report with `passed = false`, never a panic.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::model::{nehari_root, reduced_f_exploratory, CoupledState, Model, RayParts, SystemParams, Variant};
use crate::nehari::{descend, initial_guesses, minimize_from_starts, SolveOptions, SolveResult};
use crate::scalar_gs::{self, fitted_grid, rescale_v2, rescale_v2_onto};
use crate::spectral::{
    h_s_seminorm_sq, integral_power, symmetric_decreasing_rearrangement, Field, FracLaplacian, GridSpec, SymbolKind,
};
use crate::spectrum::{classify_blocks, classify_with, lambda_threshold, Verdict};

pub const TOOL_NAME: &str = "nehari";

/// Everything a scenario needs besides its own knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub grid: GridSpec,
    pub opts: SolveOptions,
    /// Size of the initial-guess family.
    pub guesses: usize,
}

impl ExperimentConfig {
    /// One-dimensional defaults: `L = 200`, `N = 8192`, continuum symbol.
    pub fn new(params: SystemParams) -> Result<Self> {
        Ok(ExperimentConfig {
            grid: GridSpec::new(params.n, 8192, 200.0, SymbolKind::Continuum)?,
            params,
            opts: SolveOptions::default(),
            guesses: 4,
        })
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.opts.validate()?;
        if self.grid.n != self.params.n {
            return Err(Error::ParameterDomain(format!(
                "grid dimension {} differs from model dimension {}",
                self.grid.n, self.params.n
            )));
        }
        if self.guesses == 0 {
            return Err(Error::ParameterDomain("guesses must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub scenario: String,
    pub params: SystemParams,
    pub grid: GridSpec,
    pub opts: SolveOptions,
    pub guesses: usize,
    pub artifacts: Vec<Artifact>,
    pub wall_time_s: f64,
}

impl RunManifest {
    fn new(scenario: &str, cfg: &ExperimentConfig) -> Self {
        RunManifest {
            tool: TOOL_NAME.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            scenario: scenario.into(),
            params: cfg.params.clone(),
            grid: cfg.grid,
            opts: cfg.opts.clone(),
            guesses: cfg.guesses,
            artifacts: Vec::new(),
            wall_time_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Common shape of scenario reports.
pub trait Report: Serialize {
    fn checks(&self) -> &[Check];
    fn manifest_mut(&mut self) -> &mut RunManifest;
    /// Named fields to be written as artifacts.
    fn fields(&self) -> Vec<(String, Field)>;

    fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

/// Summary of a solver run as it appears in reports.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub phi: f64,
    pub residual: f64,
    pub el_residual: f64,
    pub converged: bool,
    pub positive: bool,
    pub symmetric: bool,
    pub semi_trivial: bool,
    pub iterations: usize,
    pub restart: usize,
    pub energy: crate::model::EnergyBreakdown,
}

impl From<&SolveResult> for RunSummary {
    fn from(r: &SolveResult) -> Self {
        RunSummary {
            phi: r.phi(),
            residual: r.residual,
            el_residual: r.el_residual,
            converged: r.converged,
            positive: r.positive,
            symmetric: r.symmetric,
            semi_trivial: r.semi_trivial,
            iterations: r.iterations,
            restart: r.restart,
            energy: r.energy.clone(),
        }
    }
}

/// Writes every field of `report` (container, sidecar, profile CSV) and the
/// report JSON into `dir`; returns the JSON path.
pub fn write_report<R: Report>(report: &mut R, dir: &Path, name: &str, s: f64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut artifacts = Vec::new();
    for (label, field) in report.fields() {
        let path = dir.join(format!("{name}_{label}.nhf"));
        let hash = io::write_field(&path, &field, s)?;
        artifacts.push(Artifact {
            path: file_name(&path),
            sha256: hash,
        });
        let side = io::sidecar_path(&path);
        artifacts.push(Artifact {
            path: file_name(&side),
            sha256: io::sha256_hex(&std::fs::read(&side)?),
        });
        let csv = io::profile_csv(&field);
        let csv_path = dir.join(format!("{name}_{label}.csv"));
        std::fs::write(&csv_path, &csv)?;
        artifacts.push(Artifact {
            path: file_name(&csv_path),
            sha256: io::sha256_hex(csv.as_bytes()),
        });
    }
    report.manifest_mut().artifacts = artifacts;
    let json_path = dir.join(format!("{name}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(report)?)?;
    Ok(json_path)
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn solve_family(cfg: &ExperimentConfig, params: &SystemParams) -> Result<SolveResult> {
    let model = Model::for_params(params, cfg.grid)?;
    let starts = initial_guesses(params, cfg.grid, cfg.opts.seed, cfg.guesses)?;
    minimize_from_starts(&model, &starts, &cfg.opts)
}

fn solve_or_record(
    cfg: &ExperimentConfig,
    params: &SystemParams,
    checks: &mut Vec<Check>,
) -> Result<Option<SolveResult>> {
    match solve_family(cfg, params) {
        Ok(r) => {
            checks.push(Check::new(
                "converged",
                r.converged,
                format!("residual {:.3e} after {} iterations", r.residual, r.iterations),
            ));
            Ok(Some(r))
        }
        Err(e @ (Error::NonConvergence { .. } | Error::ProjectionFailure { .. })) => {
            checks.push(Check::new("converged", false, e.to_string()));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn state_fields(state: &Option<CoupledState>, prefix: &str) -> Vec<(String, Field)> {
    state
        .iter()
        .flat_map(|s| s.components().iter().enumerate())
        .map(|(j, f)| (format!("{prefix}_{j}"), f.clone()))
        .collect()
}

/// Largest Euler–Lagrange residual accepted by the theorem scenarios.
pub const EL_TOL: f64 = 1e-6;

// ---------------------------------------------------------------- th1

#[derive(Debug, Clone, Serialize)]
pub struct Th1Report {
    pub scenario: String,
    pub passed: bool,
    pub beta: f64,
    #[serde(rename = "Lambda")]
    pub threshold: f64,
    pub verdict: Verdict,
    /// `Φ(0, V₂)`.
    pub phi_semitrivial: f64,
    pub ground: Option<RunSummary>,
    /// `Φ(𝐯₂) − Φ(ũ)`.
    pub gap: Option<f64>,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
    #[serde(skip)]
    pub state: Option<CoupledState>,
}

impl Report for Th1Report {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
    fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }
    fn fields(&self) -> Vec<(String, Field)> {
        state_fields(&self.state, "ground")
    }
}

fn require_two_eq(params: &SystemParams) -> Result<()> {
    if params.variant == Variant::TwoEq {
        Ok(())
    } else {
        Err(Error::VariantMismatch(format!("scenario needs two_eq, got {}", params.variant.as_str())))
    }
}

/// Coupling above the threshold: positive even ground state below `Φ(𝐯₂)`.
pub fn verify_th1(cfg: &ExperimentConfig) -> Result<Th1Report> {
    cfg.validate()?;
    require_two_eq(&cfg.params)?;
    let clock = Instant::now();
    let p = &cfg.params;
    let beta = p.beta();
    let v2 = scalar_gs::quadratic_ground_state(p.s, p.lambdas[1], cfg.grid)?;
    let threshold = lambda_threshold(p.s, p.lambdas[0], &v2, cfg.grid)?;
    let model = Model::for_params(p, cfg.grid)?;
    let semi = CoupledState::new(vec![Field::zeros(cfg.grid), v2.clone()])?;
    let phi_semi = model.phi(&semi)?;
    let verdict = if beta > threshold.lambda {
        Verdict::Saddle
    } else {
        Verdict::StrictMin
    };

    let mut checks = vec![Check::new(
        "beta_above_threshold",
        beta > threshold.lambda,
        format!("beta {beta} vs Lambda {:.9}", threshold.lambda),
    )];
    let ground = solve_or_record(cfg, p, &mut checks)?;
    let mut gap = None;
    if let Some(r) = &ground {
        let g = phi_semi - r.phi();
        gap = Some(g);
        checks.push(Check::new("positive", r.positive, format!("component minima {:?}", mins(&r.state))));
        checks.push(Check::new("even", r.symmetric, "evenness defect within 1e-8 of the peak"));
        checks.push(Check::new("below_semitrivial", g > 0.0, format!("gap {g:.9e}")));
        checks.push(Check::new(
            "euler_lagrange_residual",
            r.el_residual <= EL_TOL,
            format!("{:.3e} (limit {EL_TOL:e})", r.el_residual),
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    let mut manifest = RunManifest::new("th1", cfg);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    info!("th1: passed = {passed}, gap = {gap:?}");
    Ok(Th1Report {
        scenario: "th1".into(),
        passed,
        beta,
        threshold: threshold.lambda,
        verdict,
        phi_semitrivial: phi_semi,
        gap,
        ground: ground.as_ref().map(RunSummary::from),
        checks,
        manifest,
        state: ground.map(|r| r.state),
    })
}

fn mins(state: &CoupledState) -> Vec<f64> {
    state.components().iter().map(|c| c.min()).collect()
}

// ---------------------------------------------------------------- th2

/// `Φ(𝐮₀)` and `Φ(𝐯₂)` for `𝐮₀ = t(V₂, V₂)` at one `λ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoupledScalingPoint {
    pub lambda2: f64,
    pub t: f64,
    pub phi_u0: f64,
    pub phi_v2: f64,
}

impl CoupledScalingPoint {
    pub fn difference(&self) -> f64 {
        self.phi_u0 - self.phi_v2
    }
}

/// Moments `∫Vʳ`, r = 2, 3, 4, of the profile solving `(−Δ)^s v + v = v²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitMoments {
    pub s: f64,
    pub n: usize,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl UnitMoments {
    pub fn of(v: &Field, s: f64) -> Self {
        UnitMoments {
            s,
            n: v.grid().n,
            m2: integral_power(v, 2),
            m3: integral_power(v, 3),
            m4: integral_power(v, 4),
        }
    }

    /// `∫V₂ʳ = 2ʳ λ₂^{r − n/(2s)} ∫Vʳ`.
    pub fn scaled(&self, r: u32, lambda2: f64) -> f64 {
        let m = match r {
            2 => self.m2,
            3 => self.m3,
            4 => self.m4,
            _ => f64::NAN,
        };
        let a = self.n as f64 / (2.0 * self.s);
        2f64.powi(r as i32) * lambda2.powf(r as f64 - a) * m
    }

    /// `Φ(𝐮₀)`, `Φ(𝐯₂)` from the moments alone.
    pub fn coupled_scaling(&self, lambda1: f64, lambda2: f64, beta: f64) -> Result<CoupledScalingPoint> {
        let (i2, i3, i4) = (
            self.scaled(2, lambda2),
            self.scaled(3, lambda2),
            self.scaled(4, lambda2),
        );
        let q = i3 + (lambda1 - lambda2) * i2;
        let t = nehari_root(&RayParts {
            q,
            c3: 0.5 * (1.0 + 3.0 * beta) * i3 / 3.0,
            c4: i4 / 4.0,
        })?;
        Ok(CoupledScalingPoint {
            lambda2,
            t,
            phi_u0: t * t * q / 6.0 + t.powi(4) * i4 / 12.0,
            phi_v2: i3 / 12.0,
        })
    }

    /// `t²(∫V³ + (λ₁−λ₂)/(2λ₂)∫V²) + t⁴λ₂∫V⁴ − ½∫V³`, which carries the sign
    /// of `Φ(𝐮₀) − Φ(𝐯₂)`.
    pub fn inequality_lhs(&self, lambda1: f64, lambda2: f64, t: f64) -> f64 {
        t * t * (self.m3 + (lambda1 - lambda2) / (2.0 * lambda2) * self.m2) + t.powi(4) * lambda2 * self.m4
            - 0.5 * self.m3
    }

    /// Factor with `Φ(𝐮₀) − Φ(𝐯₂) = factor · inequality_lhs`.
    pub fn inequality_factor(&self, lambda2: f64) -> f64 {
        8.0 / 6.0 * lambda2.powf(3.0 - self.n as f64 / (2.0 * self.s))
    }
}

/// Direct evaluation on the grid: `V₂` from `V` by dilation onto the fitted
/// grid, then projection and energy of `(V₂, V₂)`.
pub fn coupled_scaling_direct(v: &Field, s: f64, lambda1: f64, lambda2: f64, beta: f64) -> Result<CoupledScalingPoint> {
    let target = fitted_grid(v.grid(), lambda2, s);
    let v2 = rescale_v2_onto(v, lambda2, s, &target)?;
    coupled_scaling_on(&v2, s, lambda1, lambda2, beta)
}

/// `Φ(t(V₂, V₂))` and `Φ(0, V₂)` for a given `V₂`.
pub fn coupled_scaling_on(v2: &Field, s: f64, lambda1: f64, lambda2: f64, beta: f64) -> Result<CoupledScalingPoint> {
    let grid = *v2.grid();
    let p = SystemParams::two_eq(s, grid.n, lambda1, lambda2, beta)?;
    let model = Model::for_params(&p, grid)?;
    let (t, u0) = model.project(&CoupledState::new(vec![v2.clone(), v2.clone()])?)?;
    let phi_v2 = model.phi(&CoupledState::new(vec![Field::zeros(grid), v2.clone()])?)?;
    Ok(CoupledScalingPoint {
        lambda2,
        t,
        phi_u0: model.phi(&u0)?,
        phi_v2,
    })
}

/// `(1/6)t²(∫V₂³ + (λ₁−λ₂)∫V₂²) + (1/12)t⁴∫V₂⁴` from grid integrals.
pub fn phi_u0_formula(v2: &Field, lambda1: f64, lambda2: f64, t: f64) -> f64 {
    let (i2, i3, i4) = (integral_power(v2, 2), integral_power(v2, 3), integral_power(v2, 4));
    t * t * (i3 + (lambda1 - lambda2) * i2) / 6.0 + t.powi(4) * i4 / 12.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepComparison {
    pub lambda2: f64,
    pub direct: CoupledScalingPoint,
    pub rescaled: CoupledScalingPoint,
    /// `factor · inequality_lhs`, compared with the direct difference.
    pub inequality_difference: f64,
    pub discrepancy: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn compare_at(v: &Field, mo: &UnitMoments, s: f64, lambda1: f64, lambda2: f64, beta: f64) -> Result<SweepComparison> {
    let direct = coupled_scaling_direct(v, s, lambda1, lambda2, beta)?;
    let rescaled = mo.coupled_scaling(lambda1, lambda2, beta)?;
    let ineq = mo.inequality_factor(lambda2) * mo.inequality_lhs(lambda1, lambda2, rescaled.t);
    let scale = direct.phi_v2.abs();
    let discrepancy = rel(direct.phi_u0, rescaled.phi_u0)
        .max(rel(direct.phi_v2, rescaled.phi_v2))
        .max((direct.difference() - rescaled.difference()).abs() / scale)
        .max((direct.difference() - ineq).abs() / scale);
    Ok(SweepComparison {
        lambda2,
        direct,
        rescaled,
        inequality_difference: ineq,
        discrepancy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketStatus {
    Located,
    /// No sign change inside the bracket.
    Exhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct Th2Report {
    pub scenario: String,
    pub passed: bool,
    pub beta: f64,
    #[serde(rename = "Lambda")]
    pub threshold: f64,
    /// Whether `β ∈ (0, Λ]`, the hypothesis of the scenario.
    pub beta_within_threshold: bool,
    pub lambda2: f64,
    pub point: SweepComparison,
    /// `Φ(𝐮₀)` with `V₂` solved directly instead of rescaled.
    pub phi_u0_solved: f64,
    pub solve_vs_rescale_rel: f64,
    pub formula_consistency_rel: f64,
    pub bracket: (f64, f64),
    pub bracket_status: BracketStatus,
    /// Empirical `λ₂` above which `Φ(𝐮₀) < Φ(𝐯₂)`.
    pub lambda2_empirical: Option<f64>,
    pub sweep: Vec<SweepComparison>,
    pub max_discrepancy: f64,
    pub ground: Option<RunSummary>,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
    #[serde(skip)]
    pub state: Option<CoupledState>,
}

impl Report for Th2Report {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
    fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }
    fn fields(&self) -> Vec<(String, Field)> {
        state_fields(&self.state, "ground")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Th2Options {
    /// Default `[λ₁/10, 100λ₁]`.
    pub bracket: Option<(f64, f64)>,
    pub bisection_steps: usize,
    /// Log-spaced λ₂ values for the direct-versus-rescaled comparison.
    pub sweep_points: usize,
    /// Run the coupled minimization when `λ₂` exceeds the empirical threshold.
    pub minimize: bool,
}

impl Default for Th2Options {
    fn default() -> Self {
        Th2Options {
            bracket: None,
            bisection_steps: 40,
            sweep_points: 9,
            minimize: true,
        }
    }
}

/// Relative agreement required between the direct and rescaled routes.
pub const RESCALE_TOL: f64 = 1e-6;

/// Large `λ₂` with `β ≤ Λ`: `Φ(t(V₂,V₂)) < Φ(𝐯₂)` and the minimizer beats both.
pub fn verify_th2(cfg: &ExperimentConfig, th2: &Th2Options) -> Result<Th2Report> {
    cfg.validate()?;
    require_two_eq(&cfg.params)?;
    let clock = Instant::now();
    let p = &cfg.params;
    let (s, lambda1, lambda2, beta) = (p.s, p.lambdas[0], p.lambdas[1], p.beta());
    let grid = cfg.grid;

    let v = scalar_gs::unit_ground_state(s, grid)?;
    let mo = UnitMoments::of(&v, s);
    let v2_solved = scalar_gs::quadratic_ground_state(s, lambda2, grid)?;
    let threshold = lambda_threshold(s, lambda1, &v2_solved, grid)?;
    let beta_ok = beta > 0.0 && beta <= threshold.lambda;

    let point = compare_at(&v, &mo, s, lambda1, lambda2, beta)?;
    let solved = coupled_scaling_on(&v2_solved, s, lambda1, lambda2, beta)?;
    let solve_vs_rescale_rel = rel(solved.phi_u0, point.direct.phi_u0);
    let v2_rescaled = rescale_v2(&v, lambda2, s)?;
    let formula_consistency_rel = {
        let direct = coupled_scaling_on(&v2_rescaled, s, lambda1, lambda2, beta)?;
        rel(direct.phi_u0, phi_u0_formula(&v2_rescaled, lambda1, lambda2, direct.t))
    };

    // bisection on the sign of Φ(𝐮₀) − Φ(𝐯₂) via the moment formulas
    let bracket = th2.bracket.unwrap_or((lambda1 / 10.0, 100.0 * lambda1));
    if !(bracket.0 > 0.0 && bracket.1 > bracket.0) {
        return Err(Error::ParameterDomain(format!("invalid lambda2 bracket {bracket:?}")));
    }
    let f = |l2: f64| mo.coupled_scaling(lambda1, l2, beta).map(|pt| pt.difference());
    let (f_lo, f_hi) = (f(bracket.0)?, f(bracket.1)?);
    let (status, empirical) = if f_lo > 0.0 && f_hi < 0.0 {
        let (mut lo, mut hi) = bracket;
        for _ in 0..th2.bisection_steps {
            let mid = (lo * hi).sqrt();
            if f(mid)? < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (BracketStatus::Located, Some(hi))
    } else {
        (BracketStatus::Exhausted, None)
    };

    let mut lambdas: Vec<f64> = (0..th2.sweep_points)
        .map(|i| {
            let a = if th2.sweep_points > 1 {
                i as f64 / (th2.sweep_points - 1) as f64
            } else {
                0.5
            };
            bracket.0 * (bracket.1 / bracket.0).powf(a)
        })
        .collect();
    if let Some(e) = empirical {
        lambdas.push(e);
    }
    let sweep = lambdas
        .par_iter()
        .map(|&l2| compare_at(&v, &mo, s, lambda1, l2, beta))
        .collect::<Result<Vec<_>>>()?;
    let max_discrepancy = sweep.iter().map(|c| c.discrepancy).fold(point.discrepancy, f64::max);

    let mut checks = vec![
        Check::new(
            "direct_vs_rescaled",
            max_discrepancy <= RESCALE_TOL,
            format!("max relative discrepancy {max_discrepancy:.3e} over {} values of lambda2", sweep.len() + 1),
        ),
        Check::new(
            "phi_formula_consistency",
            formula_consistency_rel <= 1e-8,
            format!("{formula_consistency_rel:.3e}"),
        ),
        Check::new(
            "solved_vs_rescaled_profile",
            solve_vs_rescale_rel <= 1e-4,
            format!("{solve_vs_rescale_rel:.3e}"),
        ),
        Check::new(
            "threshold_located",
            status == BracketStatus::Located,
            format!("bracket {bracket:?}, empirical {empirical:?}"),
        ),
    ];
    let above = empirical.is_some_and(|e| lambda2 >= e);
    checks.push(Check::new(
        "u0_below_semitrivial",
        point.direct.difference() < 0.0 || !above,
        format!("Phi(u0) {:.9} vs Phi(v2) {:.9}", point.direct.phi_u0, point.direct.phi_v2),
    ));
    let mut ground = None;
    if th2.minimize && above {
        ground = solve_or_record(cfg, p, &mut checks)?;
        if let Some(r) = &ground {
            checks.push(Check::new("positive", r.positive, format!("component minima {:?}", mins(&r.state))));
            let bound = point.direct.phi_u0 * (1.0 + 1e-9);
            checks.push(Check::new(
                "ground_below_u0",
                r.phi() <= bound && r.phi() < point.direct.phi_v2,
                format!("Phi {:.9} vs Phi(u0) {:.9}", r.phi(), point.direct.phi_u0),
            ));
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let mut manifest = RunManifest::new("th2", cfg);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(Th2Report {
        scenario: "th2".into(),
        passed,
        beta,
        threshold: threshold.lambda,
        beta_within_threshold: beta_ok,
        lambda2,
        point,
        phi_u0_solved: solved.phi_u0,
        solve_vs_rescale_rel,
        formula_consistency_rel,
        bracket,
        bracket_status: status,
        lambda2_empirical: empirical,
        sweep,
        max_discrepancy,
        ground: ground.as_ref().map(RunSummary::from),
        checks,
        manifest,
        state: ground.map(|r| r.state),
    })
}

// ---------------------------------------------------------------- N system

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NSystemMode {
    /// Every `β_j > Λ_j`.
    BetaAboveThresholds,
    /// Large `λ_j`; no coupling hypothesis is checked.
    LambdasLarge,
}

#[derive(Debug, Clone, Serialize)]
pub struct NSystemReport {
    pub scenario: String,
    pub passed: bool,
    pub mode: NSystemMode,
    /// `Λ_j` with weight `V_j*` and norm `λ₀`.
    pub thresholds: Vec<f64>,
    /// `Φ` of each single semi-trivial state `(0, …, V_j*, …, 0)`.
    pub semitrivial: Vec<f64>,
    /// `Φ(0, V₁*, …, V_{N−1}*)`.
    pub all_semitrivial: f64,
    pub sum_identity_rel: f64,
    pub positive_ground_state_found: bool,
    pub ground: Option<RunSummary>,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
    #[serde(skip)]
    pub state: Option<CoupledState>,
}

impl Report for NSystemReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
    fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }
    fn fields(&self) -> Vec<(String, Field)> {
        state_fields(&self.state, "ground")
    }
}

/// Star-coupled system: semi-trivial energy ordering and a positive ground
/// state below every semi-trivial energy.
pub fn verify_n_system(cfg: &ExperimentConfig, mode: NSystemMode) -> Result<NSystemReport> {
    cfg.validate()?;
    let p = &cfg.params;
    if p.variant != Variant::StarNEq {
        return Err(Error::VariantMismatch(format!("scenario needs star_n_eq, got {}", p.variant.as_str())));
    }
    let clock = Instant::now();
    let grid = cfg.grid;
    let m = p.components();
    let model = Model::for_params(p, grid)?;
    let profiles = (1..m)
        .map(|j| scalar_gs::quadratic_ground_state(p.s, p.lambdas[j], grid))
        .collect::<Result<Vec<_>>>()?;
    let thresholds = profiles
        .iter()
        .map(|v| lambda_threshold(p.s, p.lambdas[0], v, grid).map(|t| t.lambda))
        .collect::<Result<Vec<_>>>()?;
    let single = |j: usize| -> Result<f64> {
        let comps = (0..m)
            .map(|k| if k == j { profiles[k - 1].clone() } else { Field::zeros(grid) })
            .collect();
        model.phi(&CoupledState::new(comps)?)
    };
    let semitrivial = (1..m).map(single).collect::<Result<Vec<_>>>()?;
    let mut all = vec![Field::zeros(grid)];
    all.extend(profiles.iter().cloned());
    let all_semitrivial = model.phi(&CoupledState::new(all)?)?;
    let sum: f64 = semitrivial.iter().sum();
    let sum_identity_rel = rel(all_semitrivial, sum);
    let min_single = semitrivial.iter().copied().fold(f64::INFINITY, f64::min);

    let mut checks = vec![
        Check::new("semitrivial_sum", sum_identity_rel <= 1e-10, format!("{sum_identity_rel:.3e}")),
        Check::new(
            "semitrivial_ordering",
            min_single < all_semitrivial,
            format!("min single {min_single:.9} vs all {all_semitrivial:.9}"),
        ),
    ];
    if mode == NSystemMode::BetaAboveThresholds {
        let ok = p.betas.iter().zip(&thresholds).all(|(b, l)| b > l);
        checks.push(Check::new(
            "betas_above_thresholds",
            ok,
            format!("betas {:?} vs thresholds {:?}", p.betas, thresholds),
        ));
    }
    let ground = solve_or_record(cfg, p, &mut checks)?;
    let mut positive_found = false;
    if let Some(r) = &ground {
        positive_found = r.positive && !r.semi_trivial;
        checks.push(Check::new("positive", positive_found, format!("component minima {:?}", mins(&r.state))));
        checks.push(Check::new(
            "below_semitrivial",
            r.phi() < min_single,
            format!("Phi {:.9} vs min semi-trivial {min_single:.9}", r.phi()),
        ));
    }
    let passed = checks.iter().all(|c| c.passed);
    let mut manifest = RunManifest::new(
        match mode {
            NSystemMode::BetaAboveThresholds => "th3",
            NSystemMode::LambdasLarge => "th5",
        },
        cfg,
    );
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(NSystemReport {
        scenario: manifest.scenario.clone(),
        passed,
        mode,
        thresholds,
        semitrivial,
        all_semitrivial,
        sum_identity_rel,
        positive_ground_state_found: positive_found,
        ground: ground.as_ref().map(RunSummary::from),
        checks,
        manifest,
        state: ground.map(|r| r.state),
    })
}

// ---------------------------------------------------------------- NLS2-KdV

#[derive(Debug, Clone, Serialize)]
pub struct ExploreReport {
    pub scenario: String,
    /// Always `false`: existence of a ground state is not claimed.
    pub existence_asserted: bool,
    /// `Λ₁`, `Λ₂` with weight `V` and norms `λ₁`, `λ₂`.
    pub thresholds: [f64; 2],
    /// Verdict for `(0, 0, V)`, or `None` when a coupling sits on a threshold.
    pub verdict: Option<Verdict>,
    pub min_eig: Option<f64>,
    pub phi_semitrivial: f64,
    pub result: Option<RunSummary>,
    /// `|Φ − F|/|Φ|` at the result, with `F` the exploratory reduced form.
    pub reduced_form_rel: Option<f64>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub manifest: RunManifest,
    #[serde(skip)]
    pub state: Option<CoupledState>,
}

impl Report for ExploreReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }
    fn manifest_mut(&mut self) -> &mut RunManifest {
        &mut self.manifest
    }
    fn fields(&self) -> Vec<(String, Field)> {
        state_fields(&self.state, "state")
    }
}

/// Exploratory run on the three-component system; reports, never asserts
/// existence.
pub fn explore_2nlfs_fkdv(cfg: &ExperimentConfig) -> Result<ExploreReport> {
    cfg.validate()?;
    let p = &cfg.params;
    if p.variant != Variant::TwoNlfsFkdv {
        return Err(Error::VariantMismatch(format!(
            "scenario needs two_nlfs_fkdv, got {}",
            p.variant.as_str()
        )));
    }
    let clock = Instant::now();
    let grid = cfg.grid;
    let v = scalar_gs::quadratic_ground_state(p.s, p.lambdas[2], grid)?;
    let l1 = lambda_threshold(p.s, p.lambdas[0], &v, grid)?.lambda;
    let l2 = lambda_threshold(p.s, p.lambdas[1], &v, grid)?.lambda;
    let mut notes = Vec::new();
    let (verdict, min_eig) = match classify_blocks(&[(l1, p.betas[1]), (l2, p.betas[2])]) {
        Ok((v, m)) => (Some(v), Some(m)),
        Err(e @ Error::IndeterminateClassification { .. }) => {
            notes.push(e.to_string());
            (None, None)
        }
        Err(e) => return Err(e),
    };
    let model = Model::for_params(p, grid)?;
    let phi_semi = model.phi(&CoupledState::new(vec![Field::zeros(grid), Field::zeros(grid), v.clone()])?)?;
    let mut checks = Vec::new();
    let result = solve_or_record(cfg, p, &mut checks)?;
    let reduced_form_rel = match &result {
        Some(r) => Some(rel(r.phi(), reduced_f_exploratory(p, &r.state)?)),
        None => None,
    };
    notes.push("the energy is a reconstruction; its gradient is not the stated system when beta12 != 0".into());
    let mut manifest = RunManifest::new("explore-2nlfs", cfg);
    manifest.wall_time_s = clock.elapsed().as_secs_f64();
    Ok(ExploreReport {
        scenario: "explore-2nlfs".into(),
        existence_asserted: false,
        thresholds: [l1, l2],
        verdict,
        min_eig,
        phi_semitrivial: phi_semi,
        result: result.as_ref().map(RunSummary::from),
        reduced_form_rel,
        notes,
        checks,
        manifest,
        state: result.map(|r| r.state),
    })
}

// ---------------------------------------------------------------- sweeps

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Beta,
    Lambda1,
    Lambda2,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Beta => "beta",
            SweepParam::Lambda1 => "lambda1",
            SweepParam::Lambda2 => "lambda2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta: f64,
    #[serde(rename = "Lambda")]
    pub threshold: f64,
    pub phi_semitrivial: f64,
    pub phi_ground: f64,
    pub gap: f64,
    pub converged: bool,
    pub positive: bool,
    pub semi_trivial: bool,
    pub saddle: bool,
}

pub const SWEEP_HEADER: &str = "lambda1,lambda2,beta,Lambda,phi_semitrivial,phi_ground,gap,converged,positive,semi_trivial,saddle";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{}\n",
            r.lambda1,
            r.lambda2,
            r.beta,
            r.threshold,
            r.phi_semitrivial,
            r.phi_ground,
            r.gap,
            r.converged,
            r.positive,
            r.semi_trivial,
            r.saddle
        ));
    }
    out
}

/// Two-equation sweep over one parameter; rows in input order.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    require_two_eq(&cfg.params)?;
    values
        .par_iter()
        .map(|&x| {
            let mut p = cfg.params.clone();
            match param {
                SweepParam::Beta => p.betas[0] = x,
                SweepParam::Lambda1 => p.lambdas[0] = x,
                SweepParam::Lambda2 => p.lambdas[1] = x,
            }
            p.validate()?;
            let v2 = scalar_gs::quadratic_ground_state(p.s, p.lambdas[1], cfg.grid)?;
            let threshold = lambda_threshold(p.s, p.lambdas[0], &v2, cfg.grid)?.lambda;
            let model = Model::for_params(&p, cfg.grid)?;
            let phi_semi = model.phi(&CoupledState::new(vec![Field::zeros(cfg.grid), v2])?)?;
            let (phi, converged, positive, semi) = match solve_family(cfg, &p) {
                Ok(r) => (r.phi(), r.converged, r.positive, r.semi_trivial),
                Err(Error::NonConvergence { .. } | Error::ProjectionFailure { .. }) => (f64::NAN, false, false, false),
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                lambda1: p.lambdas[0],
                lambda2: p.lambdas[1],
                beta: p.beta(),
                threshold,
                phi_semitrivial: phi_semi,
                phi_ground: phi,
                gap: phi_semi - phi,
                converged,
                positive,
                semi_trivial: semi,
                saddle: p.beta() > threshold,
            })
        })
        .collect()
}

/// One row of a box-length study for a scalar profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStudyRow {
    pub box_length: f64,
    pub points: usize,
    pub int_p2: f64,
    pub int_p3: f64,
    pub peak: f64,
}

/// Solves `(−Δ)^s v + λv = ½v²` on boxes of growing length at fixed spacing.
pub fn box_study(s: f64, lambda: f64, spacing: f64, boxes: &[f64]) -> Result<Vec<BoxStudyRow>> {
    boxes
        .iter()
        .map(|&l| {
            let mut points = (l / spacing).round() as usize;
            points += points % 2;
            let grid = GridSpec::line(points.max(8), l)?;
            let v = scalar_gs::quadratic_ground_state(s, lambda, grid)?;
            Ok(BoxStudyRow {
                box_length: l,
                points: grid.points_per_dim,
                int_p2: integral_power(&v, 2),
                int_p3: integral_power(&v, 3),
                peak: v.max(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------- self-check

fn random_smooth(grid: GridSpec, rng: &mut ChaCha8Rng) -> Result<Field> {
    let modes: Vec<(f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(1..12) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let l = grid.box_length;
    let centre: f64 = rng.gen_range(-0.2..0.2) * l;
    let width = rng.gen_range(0.05..0.2) * l;
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|xi| (xi - centre).powi(2)).sum();
        let env = (-r2 / (2.0 * width * width)).exp();
        env * modes
            .iter()
            .map(|&(a, k, ph)| a * (std::f64::consts::TAU * k * x[0] / l + ph).cos())
            .sum::<f64>()
    })
}

/// Operator and solver invariants: plane waves, self-adjointness,
/// semigroup, Stroock–Varopoulos, rearrangement, monotone descent and
/// determinism.
pub fn self_check(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let g = GridSpec::line(256, 40.0)?;

    // plane waves
    {
        let mut worst: f64 = 0.0;
        for symbol in [SymbolKind::Continuum, SymbolKind::Subordinated] {
            let grid = g.with_symbol(symbol);
            let op = FracLaplacian::new(grid, 0.7)?;
            let mult = op.multiplier();
            for k in [1usize, 5, 31, 127] {
                let u = Field::from_fn(grid, |x| (std::f64::consts::TAU * k as f64 * x[0] / grid.box_length).cos())?;
                let got = op.apply(&u)?;
                let want = u.scale(mult[k]);
                worst = worst.max(got.sub(&want)?.max_abs() / want.max_abs());
            }
        }
        checks.push(Check::new("plane_wave_eigenfunctions", worst <= 1e-12, format!("{worst:.3e}")));
    }
    // self-adjointness and semigroup
    {
        let (mut sa, mut sg): (f64, f64) = (0.0, 0.0);
        for _ in 0..10 {
            let u = random_smooth(g, &mut rng)?;
            let v = random_smooth(g, &mut rng)?;
            let op = FracLaplacian::new(g, rng.gen_range(0.3..1.0))?;
            let a = crate::spectral::inner_l2(&op.apply(&u)?, &v)?;
            let b = crate::spectral::inner_l2(&u, &op.apply(&v)?)?;
            let scale = (op.seminorm_sq(&u)? * op.seminorm_sq(&v)?).sqrt();
            sa = sa.max((a - b).abs() / scale);
            let (sa_, sb_) = (rng.gen_range(0.05..0.5), rng.gen_range(0.05..0.5));
            let two = FracLaplacian::new(g, sb_)?.apply(&FracLaplacian::new(g, sa_)?.apply(&u)?)?;
            let one = FracLaplacian::new(g, sa_ + sb_)?.apply(&u)?;
            sg = sg.max(two.sub(&one)?.max_abs() / one.max_abs());
        }
        checks.push(Check::new("self_adjointness", sa <= 1e-11, format!("{sa:.3e}")));
        checks.push(Check::new("semigroup", sg <= 1e-11, format!("{sg:.3e}")));
    }
    // Stroock–Varopoulos on the subordinated symbol
    {
        let grid = g.with_symbol(SymbolKind::Subordinated);
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..50 {
            let u = random_smooth(grid, &mut rng)?;
            let s = rng.gen_range(0.3..1.0);
            worst = worst.max(h_s_seminorm_sq(&u.abs(), s)? - h_s_seminorm_sq(&u, s)?);
        }
        checks.push(Check::new(
            "stroock_varopoulos",
            worst <= 1e-10,
            format!("max excess {worst:.3e}"),
        ));
    }
    // rearrangement preserves every power integral
    {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let u = random_smooth(g, &mut rng)?;
            let r = symmetric_decreasing_rearrangement(&u)?;
            for p in 2..=4 {
                let (a, b) = (integral_power(&u.abs(), p), integral_power(&r, p));
                worst = worst.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
            }
        }
        checks.push(Check::new("rearrangement_norms", worst <= 1e-14, format!("{worst:.3e}")));
    }
    // descent is monotone and deterministic
    {
        let grid = GridSpec::line(512, 60.0)?;
        let p = SystemParams::two_eq(0.5, 1, 1.0, 1.0, 3.0)?;
        let model = Model::for_params(&p, grid)?;
        let opts = SolveOptions {
            symmetrize_each: 5,
            ..SolveOptions::default()
        };
        let init = CoupledState::new(vec![
            Field::radial(grid, |r| (-(r * r) / 4.0).exp())?,
            Field::radial(grid, |r| 2.0 * (-(r * r) / 2.0).exp())?,
        ])?;
        let a = descend(&model, &init, &opts, 0)?;
        let b = descend(&model, &init, &opts, 0)?;
        let monotone = a
            .trace
            .windows(2)
            .all(|w| w[1].phi <= w[0].phi + 1e-12 * w[0].phi.abs());
        checks.push(Check::new(
            "monotone_descent",
            monotone && a.converged,
            format!("{} iterations, converged {}", a.iterations, a.converged),
        ));
        let same = a.phi().to_bits() == b.phi().to_bits() && a.state == b.state;
        checks.push(Check::new("determinism", same, format!("Phi {:.15}", a.phi())));
    }
    Ok(checks)
}

/// Classification of `(0, V₂)` for each coupling, sharing one threshold solve.
pub fn classify_sweep(params: &SystemParams, grid: GridSpec, betas: &[f64]) -> Result<Vec<(f64, Option<Verdict>, f64)>> {
    require_two_eq(params)?;
    let v2 = scalar_gs::quadratic_ground_state(params.s, params.lambdas[1], grid)?;
    let threshold = lambda_threshold(params.s, params.lambdas[0], &v2, grid)?;
    betas
        .iter()
        .map(|&b| match classify_with(params, b, &v2, &threshold, 0) {
            Ok(c) => Ok((b, Some(c.verdict), c.min_eig)),
            Err(Error::IndeterminateClassification { h1_block, .. }) => Ok((b, None, h1_block)),
            Err(e) => Err(e),
        })
        .collect()
}
