//! Coupling thresholds and classification of semi-trivial solutions.
//!
//! `Λ = inf ‖φ‖²_{λ₁} / ∫wφ²` is the smallest eigenvalue of the pencil
//! `((−Δ)^s + λ₁)φ = μ w φ`, found by inverse power iteration. At a
//! semi-trivial point the constrained Hessian splits into blocks; a block
//! `‖h‖²_λ − β∫wh²` has minimal Rayleigh value `Λ − β` relative to `∫wh²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoupledState, SystemParams, Variant};
use crate::scalar_gs;
use crate::spectral::{inner_l2, Field, FracLaplacian, GridSpec};

/// Distance from the threshold below which no verdict is given.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Minimum number of tangent samples for the `h₂` block.
pub const H2_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-11,
            max_iters: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Threshold {
    pub lambda: f64,
    /// Positive, normalized so that `∫wφ² = 1`.
    pub minimizer: Field,
    pub iterations: usize,
    /// `‖Aφ − ΛWφ‖ / ‖Aφ‖`.
    pub residual: f64,
}

fn check_weight(weight: &Field) -> Result<()> {
    let max = weight.max();
    // rounding noise in the far tail of a computed profile is tolerated
    if !(max > 0.0) || weight.min() < -1e-12 * max {
        return Err(Error::ParameterDomain(format!(
            "weight must be positive, range [{:.3e}, {:.3e}]",
            weight.min(),
            max
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of `((−Δ)^s + λ₁)φ = μ w φ` and its eigenfunction.
pub fn lambda_threshold(s: f64, lambda1: f64, weight: &Field, grid: GridSpec) -> Result<Threshold> {
    lambda_threshold_with(s, lambda1, weight, grid, EigenOptions::default())
}

pub fn lambda_threshold_with(
    s: f64,
    lambda1: f64,
    weight: &Field,
    grid: GridSpec,
    opts: EigenOptions,
) -> Result<Threshold> {
    if *weight.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(lambda1 > 0.0) {
        return Err(Error::ParameterDomain(format!("lambda1 must be positive, got {lambda1}")));
    }
    check_weight(weight)?;
    let op = FracLaplacian::new(grid, s)?;
    let w = weight.map(|x| x.max(0.0));
    let w_norm = |phi: &Field| inner_l2(phi, &w.mul(phi).expect("same grid")).expect("same grid").sqrt();

    let mut phi = w.scale(1.0 / w_norm(&w));
    let mut mu = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        let next = op.solve_shifted(&w.mul(&phi)?, lambda1)?;
        phi = next.scale(1.0 / w_norm(&next));
        let a_phi = op.apply_shifted(&phi, lambda1)?;
        let new_mu = inner_l2(&phi, &a_phi)?;
        let r = a_phi.lin_comb(1.0, &w.mul(&phi)?, -new_mu)?;
        residual = r.l2_norm() / a_phi.l2_norm();
        let settled = (new_mu - mu).abs() <= 1e-15 * new_mu;
        mu = new_mu;
        if residual <= opts.tol || (settled && residual <= 1e3 * opts.tol) {
            if phi.integral() < 0.0 {
                phi = phi.scale(-1.0);
            }
            return Ok(Threshold {
                lambda: mu,
                minimizer: phi,
                iterations: iter,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        best_residual: residual,
        iterations: opts.max_iters,
    })
}

/// Rayleigh quotient `‖φ‖²_λ / ∫wφ²`.
pub fn rayleigh_quotient(s: f64, lambda: f64, weight: &Field, phi: &Field) -> Result<f64> {
    let op = FracLaplacian::new(*phi.grid(), s)?;
    Ok(op.norm_sq(phi, lambda)? / inner_l2(phi, &weight.mul(phi)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictMin,
    Saddle,
}

/// Sampled lower bound on the `h₂` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Block {
    /// `min I₂″(V₂)[h]² / ‖h‖²₂` over the samples.
    pub c: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub verdict: Verdict,
    /// `Λ − β`: minimal Rayleigh value of the `h₁` block relative to `∫V₂h²`.
    pub min_eig: f64,
    pub threshold: f64,
    pub h2: Option<H2Block>,
    /// `(φ, 0)` for a saddle, `(φ, h₂)` with the worst sampled `h₂` otherwise.
    pub witness: CoupledState,
}

/// Seeded smooth radial test direction.
fn random_direction(grid: GridSpec, scale: f64, rng: &mut ChaCha8Rng) -> Result<Field> {
    let bumps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                scale * rng.gen_range(0.2..4.0),
                rng.gen_range(0.0..3.0) / scale,
            )
        })
        .collect();
    Field::radial(grid, |r| {
        bumps
            .iter()
            .map(|&(a, w, k)| a * (-(r * r) / (2.0 * w * w)).exp() * (k * r).cos())
            .sum()
    })
}

/// Samples `I₂″(V₂)[h]² = ‖h‖²₂ − ∫V₂h²` on even tangent directions
/// `(V₂|h)₂ = ¾∫V₂²h`.
pub fn sample_h2_block(s: f64, lambda2: f64, v2: &Field, samples: usize, seed: u64) -> Result<(H2Block, Field)> {
    let grid = *v2.grid();
    let op = FracLaplacian::new(grid, s)?;
    // the constraint is ⟨g, h⟩ = 0
    let g = op.apply_shifted(v2, lambda2)?.lin_comb(1.0, &v2.mul(v2)?, -0.75)?;
    let gz = inner_l2(&g, v2)?;
    let half_width = {
        let peak = v2.max();
        let above = v2.values().iter().filter(|&&x| x >= 0.5 * peak).count() as f64;
        (0.5 * above.powf(1.0 / grid.n as f64) * grid.spacing()).max(grid.spacing())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (f64::INFINITY, Field::zeros(grid));
    for _ in 0..samples {
        let h = random_direction(grid, half_width, &mut rng)?;
        let h = h.lin_comb(1.0, v2, -inner_l2(&g, &h)? / gz)?;
        let norm = op.norm_sq(&h, lambda2)?;
        if norm == 0.0 {
            continue;
        }
        let form = norm - inner_l2(v2, &h.mul(&h)?)?;
        let ratio = form / norm;
        if ratio < worst.0 {
            worst = (ratio, h);
        }
    }
    Ok((
        H2Block {
            c: worst.0,
            samples,
        },
        worst.1,
    ))
}

/// Classifies `𝐯₂ = (0, V₂)` from a precomputed profile and threshold.
pub fn classify_with(
    params: &SystemParams,
    beta: f64,
    v2: &Field,
    threshold: &Threshold,
    seed: u64,
) -> Result<Classification> {
    if params.variant != Variant::TwoEq {
        return Err(Error::VariantMismatch(format!(
            "classification of (0, V2) needs two_eq, got {}",
            params.variant.as_str()
        )));
    }
    let lambda = threshold.lambda;
    let min_eig = lambda - beta;
    let grid = *v2.grid();
    if min_eig < -CLASSIFY_TOL {
        return Ok(Classification {
            verdict: Verdict::Saddle,
            min_eig,
            threshold: lambda,
            h2: None,
            witness: CoupledState::new(vec![threshold.minimizer.clone(), Field::zeros(grid)])?,
        });
    }
    let (h2, worst) = sample_h2_block(params.s, params.lambdas[1], v2, H2_SAMPLES, seed)?;
    if min_eig <= CLASSIFY_TOL || !(h2.c > 0.0) {
        return Err(Error::IndeterminateClassification {
            beta,
            lambda,
            tol: CLASSIFY_TOL,
            h1_block: min_eig,
            h2_block: h2.c,
        });
    }
    Ok(Classification {
        verdict: Verdict::StrictMin,
        min_eig,
        threshold: lambda,
        h2: Some(h2),
        witness: CoupledState::new(vec![threshold.minimizer.clone(), worst])?,
    })
}

/// Classifies `(0, V₂)` for a two-equation system at coupling `beta`.
pub fn classify_semitrivial(params: &SystemParams, beta: f64, grid: GridSpec) -> Result<Classification> {
    let v2 = scalar_gs::quadratic_ground_state(params.s, params.lambdas[1], grid)?;
    let threshold = lambda_threshold(params.s, params.lambdas[0], &v2, grid)?;
    classify_with(params, beta, &v2, &threshold, 0)
}

/// Verdict from independent `h_j` blocks `‖h‖²_{λ_j} − β_j∫wh²`: strict
/// minimum iff every `β_j < Λ_j`.
pub fn classify_blocks(blocks: &[(f64, f64)]) -> Result<(Verdict, f64)> {
    let mut min_eig = f64::INFINITY;
    for &(lambda, beta) in blocks {
        let m = lambda - beta;
        if m.abs() <= CLASSIFY_TOL {
            return Err(Error::IndeterminateClassification {
                beta,
                lambda,
                tol: CLASSIFY_TOL,
                h1_block: m,
                h2_block: f64::NAN,
            });
        }
        min_eig = min_eig.min(m);
    }
    let verdict = if min_eig < 0.0 { Verdict::Saddle } else { Verdict::StrictMin };
    Ok((verdict, min_eig))
}

/// Threshold summary as written by the `lambda` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub s: f64,
    pub n: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    #[serde(rename = "Lambda")]
    pub threshold: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// `Λ` for the two-equation system with weight `V₂`.
pub fn threshold_report(params: &SystemParams, grid: GridSpec) -> Result<(ThresholdReport, Threshold)> {
    if params.variant != Variant::TwoEq {
        return Err(Error::VariantMismatch("threshold report needs two_eq".into()));
    }
    let v2 = scalar_gs::quadratic_ground_state(params.s, params.lambdas[1], grid)?;
    let t = lambda_threshold(params.s, params.lambdas[0], &v2, grid)?;
    Ok((
        ThresholdReport {
            s: params.s,
            n: grid.n,
            lambda1: params.lambdas[0],
            lambda2: params.lambdas[1],
            threshold: t.lambda,
            iterations: t.iterations,
            residual: t.residual,
        },
        t,
    ))
}
