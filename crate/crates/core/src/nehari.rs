//! Projection onto the Nehari manifold and constrained descent on it.
//!
//! Every iterate lives on `N = {𝐮 ≠ 0 : Ψ(𝐮) = 0}`. A step moves along the
//! preconditioned gradient `((−Δ)^s + λⱼ)^{-1} ∇Φ` and is pulled back to `N`
//! by the unique ray scaling; Armijo backtracking is done on the energy of
//! the re-projected point. Optional absolute-value and symmetric-decreasing
//! rearrangement steps are accepted only when they do not raise `Φ`.
//! Convergence is measured on `‖∇Φ − η∇Ψ‖ / ‖𝐮‖_{L²}` with `η` the
//! least-squares Lagrange multiplier.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{nehari_root, CoupledState, EnergyBreakdown, Model, SystemParams, Variant};
use crate::scalar_gs;
use crate::spectral::{symmetric_decreasing_rearrangement, Field, GridSpec};

/// Accepted steps may raise `Φ` by at most this fraction (rounding slack).
pub const DESCENT_SLACK: f64 = 1e-13;

/// A component whose L² norm falls below this fraction of the state norm
/// counts as vanished.
pub const SEMI_TRIVIAL_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Tolerance on the constrained residual, relative to `‖𝐮‖_{L²}`.
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub enforce_positivity: bool,
    /// Apply the symmetrization step every this many iterations (0 = off).
    pub symmetrize_each: usize,
    pub seed: u64,
    /// Use `((−Δ)^s + λ)^{-1}` on the gradient; plain L² gradient otherwise.
    pub preconditioned: bool,
    /// Absolute floor on `‖𝐮‖²` below which an iterate counts as collapsed.
    /// Defaults to `1e−6` times the norm of the projected initial state.
    pub collapse_floor: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iters: 20_000,
            restarts: 1,
            initial_step: 1.0,
            max_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            enforce_positivity: true,
            symmetrize_each: 0,
            seed: 0,
            preconditioned: true,
            collapse_floor: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::ParameterDomain(format!("tol must be positive, got {}", self.tol)));
        }
        if self.restarts < 1 {
            return Err(Error::ParameterDomain("restarts must be at least 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::ParameterDomain("backtracking factor must lie in (0, 1)".into()));
        }
        if !(self.initial_step > 0.0 && self.max_step >= self.initial_step) {
            return Err(Error::ParameterDomain("need 0 < initial_step <= max_step".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub phi: f64,
    pub residual: f64,
    /// Ray scaling applied by the last projection.
    pub t: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub state: CoupledState,
    pub energy: EnergyBreakdown,
    /// `‖∇Φ − η∇Ψ‖_{L²} / ‖𝐮‖_{L²}`
    pub residual: f64,
    /// `‖∇Φ‖_{L²}`, the Euler–Lagrange residual.
    pub el_residual: f64,
    pub multiplier: f64,
    pub trace: Vec<TraceEntry>,
    pub positive: bool,
    pub symmetric: bool,
    pub radially_nonincreasing: bool,
    pub semi_trivial: bool,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
}

impl SolveResult {
    pub fn phi(&self) -> f64 {
        self.energy.phi
    }

    /// `iter,phi,residual,t` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,phi,residual,t\n");
        for e in &self.trace {
            out.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", e.iter, e.phi, e.residual, e.t));
        }
        out
    }
}

/// Positive `t` with `Ψ(t𝐮) = 0`, and the projected state.
pub fn project_to_nehari(params: &SystemParams, state: &CoupledState) -> Result<(f64, CoupledState)> {
    let model = Model::for_params(params, *state.grid())?;
    model.project(state)
}

struct Evaluated {
    state: CoupledState,
    phi: f64,
    norm_sq: f64,
}

fn evaluate_projected(model: &Model, candidate: &CoupledState) -> Result<(f64, Evaluated)> {
    let parts = model.ray_parts(candidate)?;
    let t = nehari_root(&parts)?;
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
    Ok((
        t,
        Evaluated {
            state: candidate.scale(t),
            phi: 0.5 * t2 * parts.q - t3 * parts.c3 - t4 * parts.c4,
            norm_sq: t2 * parts.q,
        },
    ))
}

/// `∇Φ`, `∇Ψ` sharing the linear solve.
fn gradients(model: &Model, state: &CoupledState) -> Result<(CoupledState, CoupledState)> {
    Ok((model.gradient(state)?, model.psi_gradient(state)?))
}

fn constrained_residual(
    grad: &CoupledState,
    grad_psi: &CoupledState,
    state: &CoupledState,
) -> Result<(f64, f64)> {
    let gg = grad_psi.inner_l2(grad_psi)?;
    let eta = if gg > 0.0 { grad.inner_l2(grad_psi)? / gg } else { 0.0 };
    let r = grad.lin_comb(1.0, grad_psi, -eta)?;
    let norm = state.l2_norm();
    Ok((if norm > 0.0 { r.l2_norm() / norm } else { f64::INFINITY }, eta))
}

/// Componentwise `|uⱼ|` where flipping signs cannot raise `Φ`.
fn absolute_step(model: &Model, state: &CoupledState) -> Option<CoupledState> {
    let f = model.functional();
    let all = f.all_couplings_nonnegative();
    let mut changed = false;
    let next = state.map_components(|j, c| {
        if (all || f.sign_symmetric(j)) && c.min() < 0.0 {
            changed = true;
            c.abs()
        } else {
            c.clone()
        }
    });
    changed.then_some(next)
}

/// Rearrangement (n = 1, nonnegative states) followed by even averaging.
fn symmetrize_step(state: &CoupledState) -> Result<CoupledState> {
    let nonneg = state.components().iter().all(|c| c.min() >= 0.0);
    let comps = state
        .components()
        .iter()
        .map(|c| {
            if c.grid().n == 1 && nonneg {
                Ok(symmetric_decreasing_rearrangement(c)?.symmetrize_even())
            } else {
                Ok(c.symmetrize_even())
            }
        })
        .collect::<Result<Vec<Field>>>()?;
    CoupledState::new(comps)
}

fn try_side_step(
    model: &Model,
    current: &Evaluated,
    candidate: CoupledState,
) -> Result<Option<(f64, Evaluated)>> {
    match evaluate_projected(model, &candidate) {
        Ok((t, ev)) if ev.phi <= current.phi + DESCENT_SLACK * current.phi.abs() => Ok(Some((t, ev))),
        Ok(_) | Err(Error::ProjectionFailure { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn finish(
    model: &Model,
    state: CoupledState,
    trace: Vec<TraceEntry>,
    converged: bool,
    restart: usize,
) -> Result<SolveResult> {
    let energy = model.energy(&state)?;
    let (grad, grad_psi) = gradients(model, &state)?;
    let (residual, multiplier) = constrained_residual(&grad, &grad_psi, &state)?;
    let total = state.l2_norm();
    let scale = state.max_abs();
    let semi_trivial = state
        .components()
        .iter()
        .any(|c| c.l2_norm() <= SEMI_TRIVIAL_FRACTION * total);
    let positive = state.components().iter().all(|c| c.min() > 0.0);
    let symmetric = state
        .components()
        .iter()
        .all(|c| c.evenness_defect() <= 1e-8 * scale.max(f64::MIN_POSITIVE));
    let radially_nonincreasing = state
        .components()
        .iter()
        .all(|c| c.abs().is_radially_nonincreasing(1e-8 * scale));
    Ok(SolveResult {
        el_residual: grad.l2_norm(),
        iterations: trace.last().map_or(0, |e| e.iter),
        state,
        energy,
        residual,
        multiplier,
        trace,
        positive,
        symmetric,
        radially_nonincreasing,
        semi_trivial,
        converged,
        restart,
    })
}

/// One descent run from `init`; never errors on non-convergence, the
/// returned result carries `converged = false` instead.
pub fn descend(model: &Model, init: &CoupledState, opts: &SolveOptions, restart: usize) -> Result<SolveResult> {
    opts.validate()?;
    model.check_state(init)?;
    let (mut t, mut cur) = evaluate_projected(model, init)?;
    let floor = opts.collapse_floor.unwrap_or(1e-6 * cur.norm_sq);
    let mut step = opts.initial_step;
    let mut trace = Vec::new();
    let mut converged = false;

    for iter in 0..=opts.max_iters {
        let (grad, grad_psi) = gradients(model, &cur.state)?;
        let (residual, _) = constrained_residual(&grad, &grad_psi, &cur.state)?;
        trace.push(TraceEntry {
            iter,
            phi: cur.phi,
            residual,
            t,
            step,
        });
        if residual <= opts.tol {
            converged = true;
            break;
        }
        if iter == opts.max_iters {
            break;
        }
        let direction = if opts.preconditioned {
            model.precondition(&grad)?
        } else {
            grad.clone()
        };
        let slope = grad.inner_l2(&direction)?;
        let mut accepted = None;
        let mut alpha = step;
        while alpha >= 1e-14 {
            let candidate = cur.state.lin_comb(1.0, &direction, -alpha)?;
            match evaluate_projected(model, &candidate) {
                Ok((tn, ev)) => {
                    let bound = cur.phi - opts.sufficient_decrease * alpha * slope
                        + DESCENT_SLACK * cur.phi.abs();
                    if ev.phi <= bound {
                        accepted = Some((tn, ev, alpha));
                        break;
                    }
                }
                Err(Error::ProjectionFailure { .. }) => {}
                Err(e) => return Err(e),
            }
            alpha *= opts.backtrack;
        }
        let Some((tn, ev, alpha)) = accepted else {
            debug!("line search stalled at iteration {iter}, residual {residual:.3e}");
            break;
        };
        t = tn;
        cur = ev;
        step = (alpha / opts.backtrack).min(opts.max_step);

        if opts.enforce_positivity {
            if let Some(candidate) = absolute_step(model, &cur.state) {
                if let Some((tn, ev)) = try_side_step(model, &cur, candidate)? {
                    t = tn;
                    cur = ev;
                }
            }
        }
        if opts.symmetrize_each > 0 && (iter + 1) % opts.symmetrize_each == 0 {
            let candidate = symmetrize_step(&cur.state)?;
            if let Some((tn, ev)) = try_side_step(model, &cur, candidate)? {
                t = tn;
                cur = ev;
            }
        }
        if cur.norm_sq < floor {
            return Err(Error::NonConvergence {
                best_residual: residual,
                iterations: iter,
            });
        }
    }
    // even part of a nearly even state; keep it only if it is no worse
    let even = cur.state.map_components(|_, c| c.symmetrize_even());
    if even != cur.state {
        let defect = cur
            .state
            .lin_comb(1.0, &even, -1.0)?
            .max_abs();
        if defect <= 1e-6 * cur.state.max_abs() {
            if let Ok((_, ev)) = evaluate_projected(model, &even) {
                let (g, gp) = gradients(model, &ev.state)?;
                let (r, _) = constrained_residual(&g, &gp, &ev.state)?;
                let last = trace.last().map_or(f64::INFINITY, |e| e.residual);
                if r <= last.max(opts.tol) {
                    cur = ev;
                }
            }
        }
    }
    finish(model, cur.state, trace, converged, restart)
}

/// Smooth deterministic perturbation used for restarts.
fn perturbation(grid: &GridSpec, like: &CoupledState, seed: u64) -> CoupledState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    like.map_components(|_, c| {
        let amp = 0.1 * c.max_abs().max(1e-3);
        let bumps: Vec<(f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0) * amp, rng.gen_range(0.5..3.0)))
            .collect();
        Field::radial(*grid, |r| {
            bumps.iter().map(|(a, w)| a * (-r * r / (2.0 * w * w)).exp()).sum()
        })
        .expect("finite samples")
    })
}

/// Lowest energy wins; ties within `1e−9` relative go to the lowest index.
pub fn select_best(results: Vec<SolveResult>) -> Option<SolveResult> {
    let mut best: Option<SolveResult> = None;
    for r in results {
        best = match best {
            None => Some(r),
            Some(b) => {
                let tie = (r.phi() - b.phi()).abs() <= 1e-9 * b.phi().abs().max(1e-300);
                if !tie && r.phi() < b.phi() {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Runs every start, keeps converged runs, and applies [`select_best`].
pub fn minimize_from_starts(model: &Model, starts: &[CoupledState], opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let runs: Vec<Result<SolveResult>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| descend(model, s, opts, i))
        .collect();
    let mut best_residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = Vec::new();
    let mut first_error = None;
    for run in runs {
        match run {
            Ok(r) if r.converged => converged.push(r),
            Ok(r) => {
                if r.residual < best_residual {
                    best_residual = r.residual;
                    iterations = r.iterations;
                }
            }
            Err(e @ Error::NonConvergence { .. }) | Err(e @ Error::ProjectionFailure { .. }) => {
                debug!("start discarded: {e}");
                if let Error::NonConvergence { best_residual: b, iterations: it } = e {
                    if b < best_residual {
                        best_residual = b;
                        iterations = it;
                    }
                }
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if let Some(best) = select_best(converged) {
        return Ok(best);
    }
    if best_residual.is_finite() {
        return Err(Error::NonConvergence {
            best_residual,
            iterations,
        });
    }
    Err(first_error.unwrap_or(Error::NonConvergence {
        best_residual,
        iterations,
    }))
}

/// Restart 0 starts from `init`; restart `r` adds a seeded smooth perturbation.
pub fn minimize_functional(model: &Model, init: &CoupledState, opts: &SolveOptions) -> Result<SolveResult> {
    let grid = *model.grid();
    let mut starts = vec![init.clone()];
    for r in 1..opts.restarts {
        let p = perturbation(&grid, init, opts.seed.wrapping_add(r as u64));
        starts.push(init.lin_comb(1.0, &p, 1.0)?);
    }
    minimize_from_starts(model, &starts, opts)
}

pub fn minimize_on_nehari(params: &SystemParams, init: &CoupledState, opts: &SolveOptions) -> Result<SolveResult> {
    let model = Model::for_params(params, *init.grid())?;
    minimize_functional(&model, init, opts)
}

/// Scalar ground states feeding the guess families: the quadratic profile
/// for each quadratic component (coefficient ½), keyed by component index.
fn semitrivial_profiles(params: &SystemParams, grid: GridSpec) -> Result<Vec<Option<Field>>> {
    let quadratic: Vec<bool> = match params.variant {
        Variant::TwoEq => vec![false, true],
        Variant::StarNEq => (0..params.components()).map(|j| j > 0).collect(),
        Variant::TwoNlfsFkdv => vec![false, false, true],
    };
    quadratic
        .iter()
        .zip(&params.lambdas)
        .map(|(&q, &l)| {
            if q {
                scalar_gs::quadratic_ground_state(params.s, l, grid).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Epsilon ladder of family (a).
pub const EPSILON_LADDER: [f64; 3] = [0.1, 0.5, 0.02];

/// Deterministic starting family:
///
/// * index 0: (a) semi-trivial state with `ε·g` in the cubic components, `ε = 0.1`;
/// * index 1: (c) every component set to the first quadratic profile, projected;
/// * indices 2, 3: (a) with the remaining `ε` of [`EPSILON_LADDER`];
/// * then (b) co-centred Gaussian bumps with seeded widths and amplitudes.
pub fn initial_guesses(params: &SystemParams, grid: GridSpec, seed: u64, count: usize) -> Result<Vec<CoupledState>> {
    if count == 0 {
        return Err(Error::ParameterDomain("count must be at least 1".into()));
    }
    let model = Model::for_params(params, grid)?;
    let profiles = semitrivial_profiles(params, grid)?;
    let reference = profiles.iter().flatten().next().cloned().expect("every variant has a quadratic component");
    let peak = reference.max_abs();
    // width where the reference profile drops to half its peak
    let width = {
        let c = grid.points_per_dim / 2;
        let vals = reference.values();
        (c..grid.points_per_dim)
            .find(|&j| vals[flat_on_axis(&grid, j)] < 0.5 * peak)
            .map_or(grid.spacing(), |j| (j - c) as f64 * grid.spacing())
            .max(grid.spacing())
    };
    let bump = Field::radial(grid, |r| (-(r * r) / (2.0 * width * width)).exp())?;

    let family_a = |eps: f64| -> Result<CoupledState> {
        let comps = profiles
            .iter()
            .map(|p| match p {
                Some(f) => f.clone(),
                None => bump.scale(eps * peak),
            })
            .collect();
        CoupledState::new(comps)
    };
    let family_c = || -> Result<CoupledState> {
        let comps = profiles.iter().map(|_| reference.clone()).collect();
        let (_, projected) = model.project(&CoupledState::new(comps)?)?;
        Ok(projected)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let guess = match i {
            0 => family_a(EPSILON_LADDER[0])?,
            1 => family_c()?,
            2 | 3 => family_a(EPSILON_LADDER[i - 1])?,
            _ => {
                let comps = (0..params.components())
                    .map(|_| {
                        let a = rng.gen_range(0.3..1.5) * peak;
                        let w = rng.gen_range(0.5..2.0) * width;
                        Field::radial(grid, |r| a * (-(r * r) / (2.0 * w * w)).exp())
                    })
                    .collect::<Result<Vec<_>>>()?;
                CoupledState::new(comps)?
            }
        };
        out.push(guess);
    }
    Ok(out)
}

/// Flat index of the point at axis-0 index `j`, other axes at the centre.
fn flat_on_axis(grid: &GridSpec, j: usize) -> usize {
    let c = grid.points_per_dim / 2;
    let mut flat = j;
    for _ in 1..grid.n {
        flat = flat * grid.points_per_dim + c;
    }
    flat
}
