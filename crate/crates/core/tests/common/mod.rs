#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use nehari_core::{Field, FracLaplacian, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-enveloped sum of a few low modes.
pub fn smooth_field(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let l = grid.box_length;
    let modes: Vec<(f64, f64, f64)> = (0..5)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0..8) as f64, rng.gen_range(0.0..TAU)))
        .collect();
    let c = rng.gen_range(-0.1..0.1) * l;
    let w = rng.gen_range(0.04..0.12) * l;
    Field::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|xi| (xi - c).powi(2)).sum();
        (-r2 / (2.0 * w * w)).exp()
            * modes.iter().map(|&(a, k, p)| a * (TAU * k * x[0] / l + p).cos()).sum::<f64>()
    })
    .unwrap()
}

/// Positive smooth radial bump with random width and height.
pub fn positive_bump(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
    let a = rng.gen_range(0.3..3.0);
    let w = rng.gen_range(0.5..4.0);
    Field::radial(grid, |r| a * (-(r * r) / (2.0 * w * w)).exp()).unwrap()
}

/// Dense matrix of `(−Δ)^s + λ` on a one-dimensional grid, built from the
/// circulant form `A_ij = (1/N) Σ_k (m_k + λ) cos(2πk(i−j)/N)`.
pub fn dense_operator(grid: GridSpec, s: f64, lambda: f64) -> DMatrix<f64> {
    let n = grid.points_per_dim;
    let op = FracLaplacian::new(grid, s).unwrap();
    let m = op.multiplier();
    let col: Vec<f64> = (0..n)
        .map(|d| {
            (0..n)
                .map(|k| (m[k] + lambda) * (2.0 * PI * (k * d % n) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
}

/// Smallest eigenvalue of `A φ = μ W φ` for positive definite `A` and
/// `W ≥ 0`: the reciprocal of the largest eigenvalue of `A^{-1/2} W A^{-1/2}`,
/// which stays well conditioned when `W` nearly vanishes somewhere.
pub fn dense_generalized_min(a: &DMatrix<f64>, w: &[f64]) -> f64 {
    let n = w.len();
    let eig = SymmetricEigen::new(a.clone());
    let q = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    let inv_sqrt = q * d * q.transpose();
    let wm = DMatrix::from_fn(n, n, |i, j| if i == j { w[i] } else { 0.0 });
    let b = &inv_sqrt * wm * &inv_sqrt;
    let b = (&b + b.transpose()) * 0.5;
    1.0 / SymmetricEigen::new(b).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of the symmetric matrix `A − βW`.
pub fn dense_shifted_min(a: &DMatrix<f64>, w: &[f64], beta: f64) -> f64 {
    let mut b = a.clone();
    for (i, wi) in w.iter().enumerate() {
        b[(i, i)] -= beta * wi;
    }
    SymmetricEigen::new(b).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn rel_linf(a: &Field, b: &Field) -> f64 {
    a.sub(b).unwrap().max_abs() / b.max_abs()
}
