//! Periodic pseudospectral discretization of ℝⁿ.
//!
//! A [`GridSpec`] truncates ℝⁿ to the periodic box `[-L/2, L/2)ⁿ` sampled at
//! `points_per_dim` points per axis. The fractional Laplacian acts as a
//! Fourier multiplier, either the continuum symbol `|2πk/L|^{2s}` or the
//! `s`-th power of the exact eigenvalues of the second-order discrete
//! Laplacian ("subordinated" symbol). The second variant makes Markovian
//! inequalities such as `‖(−Δ)^{s/2}|u|‖ ≤ ‖(−Δ)^{s/2}u‖` hold exactly on
//! the grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SymbolKind {
    /// `(2π|k|/L)^{2s}`.
    #[default]
    Continuum,
    /// `σ_k^s` with `σ_k` the eigenvalues of the centered second difference.
    Subordinated,
}

impl SymbolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Continuum => "continuum",
            SymbolKind::Subordinated => "subordinated",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            SymbolKind::Continuum => 0,
            SymbolKind::Subordinated => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(SymbolKind::Continuum),
            1 => Some(SymbolKind::Subordinated),
            _ => None,
        }
    }
}

impl std::str::FromStr for SymbolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuum" => Ok(SymbolKind::Continuum),
            "subordinated" => Ok(SymbolKind::Subordinated),
            other => Err(Error::ParameterDomain(format!("unknown symbol kind '{other}'"))),
        }
    }
}

/// Uniform periodic grid on `[-L/2, L/2)ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub points_per_dim: usize,
    pub box_length: f64,
    #[serde(default)]
    pub symbol: SymbolKind,
}

impl GridSpec {
    pub fn new(n: usize, points_per_dim: usize, box_length: f64, symbol: SymbolKind) -> Result<Self> {
        let grid = GridSpec {
            n,
            points_per_dim,
            box_length,
            symbol,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// One-dimensional grid with the continuum symbol.
    pub fn line(points: usize, box_length: f64) -> Result<Self> {
        Self::new(1, points, box_length, SymbolKind::Continuum)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {}", self.n)));
        }
        if self.points_per_dim < 8 || self.points_per_dim % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points_per_dim must be even and >= 8, got {}",
                self.points_per_dim
            )));
        }
        if !(self.box_length.is_finite() && self.box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {}",
                self.box_length
            )));
        }
        Ok(())
    }

    pub fn with_symbol(mut self, symbol: SymbolKind) -> Self {
        self.symbol = symbol;
        self
    }

    pub fn with_box(mut self, box_length: f64) -> Self {
        self.box_length = box_length;
        self
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_dim as f64
    }

    pub fn total_points(&self) -> usize {
        self.points_per_dim.pow(self.n as u32)
    }

    /// Quadrature weight `hⁿ` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n as i32)
    }

    /// Coordinate of sample `i` along one axis; index `N/2` sits at the origin.
    pub fn axis_coordinate(&self, i: usize) -> f64 {
        -0.5 * self.box_length + i as f64 * self.spacing()
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        (0..self.points_per_dim).map(|i| self.axis_coordinate(i)).collect()
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for axis in (0..self.n).rev() {
            idx[axis] = flat % self.points_per_dim;
            flat /= self.points_per_dim;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.n {
            x[axis] = self.axis_coordinate(idx[axis]);
        }
        x
    }

    pub fn radius(&self, flat: usize) -> f64 {
        let x = self.point(flat);
        x[..self.n].iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Flat index of the point reflected through the origin, `x ↦ −x`.
    pub fn reflected_index(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        let np = self.points_per_dim;
        let mut out = 0;
        for axis in 0..self.n {
            out = out * np + (np - idx[axis]) % np;
        }
        out
    }

    /// Signed integer frequency of FFT bin `j`.
    pub fn frequency(&self, j: usize) -> i64 {
        let np = self.points_per_dim;
        if j < np / 2 {
            j as i64
        } else {
            j as i64 - np as i64
        }
    }

    /// Symbol of `−Δ` for every Fourier mode, in FFT order.
    pub fn laplacian_symbol(&self) -> Vec<f64> {
        let np = self.points_per_dim;
        let h = self.spacing();
        let per_axis: Vec<f64> = (0..np)
            .map(|j| {
                let k = self.frequency(j) as f64;
                match self.symbol {
                    SymbolKind::Continuum => (2.0 * PI * k / self.box_length).powi(2),
                    SymbolKind::Subordinated => {
                        let s = (PI * k / np as f64).sin();
                        4.0 * s * s / (h * h)
                    }
                }
            })
            .collect();
        (0..self.total_points())
            .map(|flat| {
                let idx = self.multi_index(flat);
                idx[..self.n].iter().map(|&j| per_axis[j]).sum()
            })
            .collect()
    }
}

/// Real scalar function sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.total_points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain(format!("non-finite sample at index {i}")));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_points());
        Field { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field::from_raw(grid, vec![0.0; grid.total_points()])
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Field::from_raw(grid, vec![c; grid.total_points()])
    }

    /// Samples `f(x)` at every grid point; `x` has length `n`.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.total_points())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..grid.n])
            })
            .collect();
        Field::new(grid, values)
    }

    /// Samples a radial profile `f(|x|)`.
    pub fn radial(grid: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x| f(x.iter().map(|c| c * c).sum::<f64>().sqrt()))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |x, y| x * y)
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rectangle-rule integral `hⁿ Σ uᵢ`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `(∫u²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `x ↦ u(−x)` on the periodic grid.
    pub fn reflect(&self) -> Field {
        let values = (0..self.len())
            .map(|i| self.values[self.grid.reflected_index(i)])
            .collect();
        Field::from_raw(self.grid, values)
    }

    /// Largest deviation from evenness, `max |u(x) − u(−x)|`.
    pub fn evenness_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.values[i] - self.values[self.grid.reflected_index(i)]).abs())
            .fold(0.0, f64::max)
    }

    /// Even part `(u(x) + u(−x))/2`.
    pub fn symmetrize_even(&self) -> Field {
        let values = (0..self.len())
            .map(|i| 0.5 * (self.values[i] + self.values[self.grid.reflected_index(i)]))
            .collect();
        Field::from_raw(self.grid, values)
    }

    /// Checks that samples do not increase with distance from the origin
    /// (up to `tol`) when walking outwards along every axis.
    pub fn is_radially_nonincreasing(&self, tol: f64) -> bool {
        let g = &self.grid;
        (0..self.len()).all(|i| {
            let ri = g.radius(i);
            let idx = g.multi_index(i);
            (0..g.n).all(|axis| {
                let c = g.points_per_dim / 2;
                let j = idx[axis];
                // neighbour one step further from the centre along this axis
                let nj = if j >= c {
                    if j + 1 >= g.points_per_dim {
                        return true;
                    }
                    j + 1
                } else if j == 0 {
                    return true;
                } else {
                    j - 1
                };
                let mut nidx = idx;
                nidx[axis] = nj;
                let mut flat = 0;
                for a in 0..g.n {
                    flat = flat * g.points_per_dim + nidx[a];
                }
                g.radius(flat) < ri || self.values[flat] <= self.values[i] + tol
            })
        })
    }
}

/// `∫ uᵖ dx` by the rectangle rule.
pub fn integral_power(u: &Field, p: u32) -> f64 {
    let h = u.grid.cell_volume();
    h * u.values.iter().map(|&x| x.powi(p as i32)).sum::<f64>()
}

/// L² inner product `∫ u v dx`.
pub fn inner_l2(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    Ok(u.grid.cell_volume() * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>())
}

/// Separable n-dimensional complex FFT on a cubic grid.
#[derive(Clone)]
pub struct FftNd {
    n: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd").field("n", &self.n).field("len", &self.len).finish()
    }
}

impl FftNd {
    pub fn new(n: usize, len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftNd {
            n,
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    fn run(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let len = self.len;
        // last axis is contiguous
        fft.process(buf);
        if self.n == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); len];
        let total = buf.len();
        for axis in 0..self.n - 1 {
            let stride = len.pow((self.n - 1 - axis) as u32);
            let block = stride * len;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + j * stride];
                    }
                    fft.process(&mut line);
                    for (j, value) in line.iter().enumerate() {
                        buf[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.forward)
    }

    /// Unnormalized inverse transform (caller divides by `Nⁿ`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inverse)
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut buf);
        let scale = 1.0 / buf.len() as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// `(−Δ)^s` on a fixed grid, with cached plans and multiplier.
#[derive(Debug, Clone)]
pub struct FracLaplacian {
    grid: GridSpec,
    s: f64,
    multiplier: Vec<f64>,
    fft: FftNd,
}

pub fn check_exponent(s: f64) -> Result<()> {
    if s.is_finite() && s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("fractional exponent s must lie in (0, 1], got {s}")))
    }
}

impl FracLaplacian {
    pub fn new(grid: GridSpec, s: f64) -> Result<Self> {
        grid.validate()?;
        check_exponent(s)?;
        let multiplier = grid
            .laplacian_symbol()
            .into_iter()
            .map(|sigma| if sigma == 0.0 { 0.0 } else { sigma.powf(s) })
            .collect();
        Ok(FracLaplacian {
            grid,
            s,
            multiplier,
            fft: FftNd::new(grid.n, grid.points_per_dim),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn exponent(&self) -> f64 {
        self.s
    }

    /// Multiplier `m_k` in FFT order.
    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    pub fn fft(&self) -> &FftNd {
        &self.fft
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Applies `g(m_k)` mode by mode.
    pub fn apply_symbol(&self, u: &Field, g: impl Fn(f64) -> f64) -> Result<Field> {
        self.check(u)?;
        let mut hat = self.fft.forward_real(&u.values);
        for (c, &m) in hat.iter_mut().zip(&self.multiplier) {
            *c *= g(m);
        }
        Ok(Field::from_raw(self.grid, self.fft.inverse_real(hat)))
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.apply_symbol(u, |m| m)
    }

    /// `(−Δ)^s u + λu`.
    pub fn apply_shifted(&self, u: &Field, lambda: f64) -> Result<Field> {
        self.apply_symbol(u, |m| m + lambda)
    }

    /// `((−Δ)^s + λ)^{-1} u`, `λ > 0`.
    pub fn solve_shifted(&self, u: &Field, lambda: f64) -> Result<Field> {
        if lambda <= 0.0 {
            return Err(Error::ParameterDomain(format!("shift must be positive, got {lambda}")));
        }
        self.apply_symbol(u, |m| 1.0 / (m + lambda))
    }

    fn quadratic_form(&self, u: &Field, weight: impl Fn(f64) -> f64) -> Result<f64> {
        self.check(u)?;
        let hat = self.fft.forward_real(&u.values);
        let total = self.grid.total_points() as f64;
        let sum: f64 = hat
            .iter()
            .zip(&self.multiplier)
            .map(|(c, &m)| weight(m) * c.norm_sqr())
            .sum();
        Ok(self.grid.cell_volume() * sum / total)
    }

    /// `∫ |(−Δ)^{s/2} u|² dx` via Parseval.
    pub fn seminorm_sq(&self, u: &Field) -> Result<f64> {
        self.quadratic_form(u, |m| m)
    }

    /// `‖u‖²_λ = ∫ |(−Δ)^{s/2}u|² + λ u²`.
    pub fn norm_sq(&self, u: &Field, lambda: f64) -> Result<f64> {
        self.quadratic_form(u, |m| m + lambda)
    }

    /// `(u|v)_λ = ∫ (−Δ)^{s/2}u (−Δ)^{s/2}v + λ u v`.
    pub fn weighted_inner(&self, u: &Field, v: &Field, lambda: f64) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        let a = self.fft.forward_real(&u.values);
        let b = self.fft.forward_real(&v.values);
        let total = self.grid.total_points() as f64;
        let sum: f64 = a
            .iter()
            .zip(&b)
            .zip(&self.multiplier)
            .map(|((x, y), &m)| (m + lambda) * (x * y.conj()).re)
            .sum();
        Ok(self.grid.cell_volume() * sum / total)
    }
}

/// `(−Δ)^s u` with a freshly planned operator.
pub fn frac_laplacian(u: &Field, s: f64) -> Result<Field> {
    FracLaplacian::new(u.grid, s)?.apply(u)
}

pub fn h_s_seminorm_sq(u: &Field, s: f64) -> Result<f64> {
    FracLaplacian::new(u.grid, s)?.seminorm_sq(u)
}

pub fn weighted_inner(u: &Field, v: &Field, s: f64, lambda: f64) -> Result<f64> {
    u.check_same_grid(v)?;
    if !(lambda > 0.0) {
        return Err(Error::ParameterDomain(format!("lambda must be positive, got {lambda}")));
    }
    FracLaplacian::new(u.grid, s)?.weighted_inner(u, v, lambda)
}

/// Even, radially non-increasing rearrangement of `|u|` (n = 1).
///
/// The output is a permutation of the samples `|uᵢ|`: the largest value goes
/// to the origin and the rest alternate right/left outwards, finishing at
/// `x = −L/2`.
pub fn symmetric_decreasing_rearrangement(u: &Field) -> Result<Field> {
    let grid = u.grid;
    if grid.n != 1 {
        return Err(Error::UnsupportedDimension(grid.n));
    }
    let np = grid.points_per_dim;
    let mut sorted: Vec<f64> = u.values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let center = np / 2;
    let mut order = Vec::with_capacity(np);
    order.push(center);
    for d in 1..center {
        order.push(center + d);
        order.push(center - d);
    }
    order.push(0);
    let mut out = vec![0.0; np];
    for (slot, value) in order.into_iter().zip(sorted) {
        out[slot] = value;
    }
    Ok(Field::from_raw(grid, out))
}

/// Evaluates the 1-D trigonometric interpolant of `values` (samples on
/// `grid`) at arbitrary coordinates inside the box.
pub(crate) fn trig_eval_1d(grid: &GridSpec, coeffs: &[Complex64], xs: &[f64]) -> Vec<f64> {
    let np = grid.points_per_dim;
    let half = np / 2;
    let inv_n = 1.0 / np as f64;
    xs.iter()
        .map(|&x| {
            let theta = 2.0 * PI * (x + 0.5 * grid.box_length) / grid.box_length;
            let step = Complex64::new(theta.cos(), theta.sin());
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = coeffs[0].re;
            for k in 1..half {
                rot *= step;
                // resync the recurrence to keep rounding from accumulating
                if k % 64 == 0 {
                    let a = theta * k as f64;
                    rot = Complex64::new(a.cos(), a.sin());
                }
                acc += 2.0 * (coeffs[k] * rot).re;
            }
            acc += coeffs[half].re * (theta * half as f64).cos();
            acc * inv_n
        })
        .collect()
}

/// Samples `u(c·x)` on `target` by trigonometric interpolation of `u`,
/// axis by axis; points whose dilated coordinate leaves the source box get 0.
pub fn dilate(u: &Field, factor: f64, target: &GridSpec) -> Result<Field> {
    let src = u.grid;
    if target.n != src.n {
        return Err(Error::GridMismatch);
    }
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::ParameterDomain(format!("dilation factor must be positive, got {factor}")));
    }
    let half_box = 0.5 * src.box_length;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(src.points_per_dim);
    let xs: Vec<f64> = target.axis_coordinates().iter().map(|x| factor * x).collect();
    let inside: Vec<bool> = xs.iter().map(|x| *x >= -half_box - 1e-12 && *x < half_box).collect();

    // current array has shape [t, t, .., s, s] with `done` target axes
    let mut data = u.values.clone();
    let ns = src.points_per_dim;
    let nt = target.points_per_dim;
    for axis in 0..src.n {
        let mut shape: Vec<usize> = (0..src.n).map(|a| if a < axis { nt } else { ns }).collect();
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        shape[axis] = nt;
        let mut next = vec![0.0; outer * nt * stride];
        let mut line = vec![Complex64::new(0.0, 0.0); ns];
        for o in 0..outer {
            for i in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = Complex64::new(data[(o * ns + j) * stride + i], 0.0);
                }
                fft.process(&mut line);
                let vals = trig_eval_1d(&src, &line, &xs);
                for (j, v) in vals.into_iter().enumerate() {
                    next[(o * nt + j) * stride + i] = if inside[j] { v } else { 0.0 };
                }
            }
        }
        data = next;
    }
    Field::new(*target, data)
}

/// Trigonometric interpolation onto a grid with `factor` times as many
/// points per axis (zero padding in frequency).
pub fn upsample(u: &Field, factor: usize) -> Result<Field> {
    let src = u.grid;
    let target = GridSpec::new(src.n, src.points_per_dim * factor, src.box_length, src.symbol)?;
    let ns = src.points_per_dim;
    let nt = target.points_per_dim;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(ns);
    let inv = planner.plan_fft_inverse(nt);
    let mut data = u.values.clone();
    for axis in 0..src.n {
        let shape: Vec<usize> = (0..src.n).map(|a| if a < axis { nt } else { ns }).collect();
        let stride: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let mut next = vec![0.0; outer * nt * stride];
        let mut line = vec![Complex64::new(0.0, 0.0); ns];
        let mut padded = vec![Complex64::new(0.0, 0.0); nt];
        for o in 0..outer {
            for i in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = Complex64::new(data[(o * ns + j) * stride + i], 0.0);
                }
                fwd.process(&mut line);
                padded.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                let half = ns / 2;
                for k in 0..half {
                    padded[k] = line[k];
                }
                for k in 1..half {
                    padded[nt - k] = line[ns - k];
                }
                // split the Nyquist coefficient to keep the interpolant real
                padded[half] = 0.5 * line[half];
                padded[nt - half] = 0.5 * line[half];
                // source samples sit at the same coordinates, so only a phase-free rescale is needed
                inv.process(&mut padded);
                for (j, c) in padded.iter().enumerate() {
                    next[(o * nt + j) * stride + i] = c.re / ns as f64;
                }
            }
        }
        data = next;
    }
    Field::new(target, data)
}

/// `∫uᵖ` evaluated on a twice-refined grid (zero-padding mode).
pub fn integral_power_padded(u: &Field, p: u32) -> Result<f64> {
    Ok(integral_power(&upsample(u, 2)?, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(np: usize, l: f64) -> GridSpec {
        GridSpec::line(np, l).unwrap()
    }

    fn random_smooth(grid: GridSpec, rng: &mut ChaCha8Rng) -> Field {
        let bumps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-0.25..0.25) * grid.box_length,
                    rng.gen_range(0.05..0.15) * grid.box_length,
                )
            })
            .collect();
        Field::from_fn(grid, |x| {
            bumps
                .iter()
                .map(|(a, c, w)| {
                    let d2: f64 = x.iter().map(|xi| (xi - c).powi(2)).sum();
                    a * (-d2 / (2.0 * w * w)).exp()
                })
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::line(6, 1.0).is_err());
        assert!(GridSpec::line(9, 1.0).is_err());
        assert!(GridSpec::line(8, 0.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0, SymbolKind::Continuum).is_err());
        let g = GridSpec::new(2, 16, 4.0, SymbolKind::Continuum).unwrap();
        assert_eq!(g.total_points(), 256);
        assert!((g.spacing() - 0.25).abs() < 1e-15);
        assert_eq!(g.axis_coordinate(8), 0.0);
    }

    #[test]
    fn reflection_indices() {
        let g = GridSpec::new(2, 8, 8.0, SymbolKind::Continuum).unwrap();
        for i in 0..g.total_points() {
            let x = g.point(i);
            let y = g.point(g.reflected_index(i));
            for a in 0..2 {
                let expect = -x[a];
                let wrapped = if expect >= 4.0 { expect - 8.0 } else { expect };
                assert!((y[a] - wrapped).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_is_annihilated() {
        let g = line(64, 10.0);
        let u = Field::constant(g, 1.0);
        let out = frac_laplacian(&u, 0.4).unwrap();
        assert!(out.max_abs() < 1e-14);
    }

    #[test]
    fn cosine_is_eigenfunction() {
        for s in [0.3, 0.5, 1.0] {
            let l = 7.0;
            let g = line(64, l);
            let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / l).cos()).unwrap();
            let out = frac_laplacian(&u, s).unwrap();
            let m = (2.0 * PI / l).powf(2.0 * s);
            let expected = u.scale(m);
            assert!(out.sub(&expected).unwrap().max_abs() < 1e-12 * m.max(1.0));
        }
    }

    #[test]
    fn s_one_matches_second_derivative() {
        let l = 5.0;
        let g = line(32, l);
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / l).cos()).unwrap();
        let out = frac_laplacian(&u, 1.0).unwrap();
        let minus_second = u.scale((2.0 * PI / l).powi(2));
        assert!(out.sub(&minus_second).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn exponent_domain() {
        let u = Field::zeros(line(8, 1.0));
        assert!(matches!(frac_laplacian(&u, 0.0), Err(Error::ParameterDomain(_))));
        assert!(matches!(frac_laplacian(&u, 1.5), Err(Error::ParameterDomain(_))));
        assert!(matches!(h_s_seminorm_sq(&u, -0.1), Err(Error::ParameterDomain(_))));
    }

    #[test]
    fn single_mode_seminorm_and_inner() {
        let l = 9.0;
        let s = 0.35;
        let g = line(128, l);
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / l).cos()).unwrap();
        let m = (2.0 * PI / l).powf(2.0 * s);
        let semi = h_s_seminorm_sq(&u, s).unwrap();
        assert!((semi - m * l / 2.0).abs() < 1e-12 * semi);
        let inner = weighted_inner(&u, &u, s, 1.0).unwrap();
        assert!((inner - (m + 1.0) * l / 2.0).abs() < 1e-12 * inner);
        assert_eq!(h_s_seminorm_sq(&Field::zeros(g), s).unwrap(), 0.0);
        assert_eq!(weighted_inner(&Field::zeros(g), &u, s, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn weighted_inner_symmetry_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = line(256, 20.0);
        for _ in 0..10 {
            let u = random_smooth(g, &mut rng);
            let v = random_smooth(g, &mut rng);
            let a = weighted_inner(&u, &v, 0.6, 1.3).unwrap();
            let b = weighted_inner(&v, &u, 0.6, 1.3).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            let uu = weighted_inner(&u, &u, 0.6, 1.3).unwrap();
            let split = h_s_seminorm_sq(&u, 0.6).unwrap() + 1.3 * integral_power(&u, 2);
            assert!((uu - split).abs() < 1e-12 * uu);
        }
        let other = Field::zeros(line(128, 20.0));
        let u = Field::zeros(g);
        assert!(matches!(weighted_inner(&u, &other, 0.5, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn parseval_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = line(128, 12.0);
        let u = random_smooth(g, &mut rng).map(|v| v + 0.3);
        let semi = h_s_seminorm_sq(&u, f64::MIN_POSITIVE).unwrap();
        let mean = u.integral() / g.box_length;
        let expected = integral_power(&u, 2) - mean * mean * g.box_length;
        assert!((semi - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn two_dimensional_operator() {
        let l = 6.0;
        let g = GridSpec::new(2, 16, l, SymbolKind::Continuum).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0] / l).cos() * (4.0 * PI * x[1] / l).sin()).unwrap();
        let s = 0.7;
        let out = frac_laplacian(&u, s).unwrap();
        let m = ((2.0 * PI / l).powi(2) * 5.0).powf(s);
        assert!(out.sub(&u.scale(m)).unwrap().max_abs() < 1e-11 * m);
    }

    #[test]
    fn subordinated_symbol_matches_second_difference() {
        let g = line(32, 4.0).with_symbol(SymbolKind::Subordinated);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_smooth(g, &mut rng);
        let out = frac_laplacian(&u, 1.0).unwrap();
        let h = g.spacing();
        let v = u.values();
        let np = v.len();
        for i in 0..np {
            let fd = (2.0 * v[i] - v[(i + 1) % np] - v[(i + np - 1) % np]) / (h * h);
            assert!((out.values()[i] - fd).abs() < 1e-10 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn closed_form_power_integrals() {
        let g = line(8192, 200.0);
        let v = Field::from_fn(g, |x| 2.0 / (1.0 + x[0] * x[0])).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(integral_power(&v, 3), 3.0 * PI) < 1e-3);
        assert!(rel(integral_power(&v, 2), 2.0 * PI) < 1e-3);
        let w = v.scale(2.0);
        assert!(rel(integral_power(&w, 4), 80.0 * PI) < 1e-3);
    }

    #[test]
    fn rearrangement_basics() {
        let g = line(64, 10.0);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let r = symmetric_decreasing_rearrangement(&u).unwrap();
        assert_eq!(r.values(), u.values());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_smooth(g, &mut rng);
        let r = symmetric_decreasing_rearrangement(&w).unwrap();
        for p in [2, 3, 4] {
            let a = integral_power(&w.abs(), p);
            let b = integral_power(&r, p);
            assert!((a - b).abs() <= 1e-14 * a.abs());
        }
        assert!(r.is_radially_nonincreasing(0.0));

        let g2 = GridSpec::new(2, 8, 1.0, SymbolKind::Continuum).unwrap();
        assert!(matches!(
            symmetric_decreasing_rearrangement(&Field::zeros(g2)),
            Err(Error::UnsupportedDimension(2))
        ));
    }

    #[test]
    fn dilation_reproduces_closed_form() {
        let g = line(1024, 40.0);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let c = 1.37;
        let d = dilate(&u, c, &g).unwrap();
        let expected = Field::from_fn(g, |x| (-(c * x[0]).powi(2)).exp()).unwrap();
        assert!(d.sub(&expected).unwrap().max_abs() < 1e-12);
        let same = dilate(&u, 1.0, &g).unwrap();
        assert!(same.sub(&u).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn upsampling_is_exact_for_band_limited() {
        let l = 10.0;
        let g = GridSpec::new(2, 16, l, SymbolKind::Continuum).unwrap();
        let f = |x: &[f64]| 1.0 + (2.0 * PI * x[0] / l).sin() * (6.0 * PI * x[1] / l).cos();
        let u = Field::from_fn(g, f).unwrap();
        let up = upsample(&u, 2).unwrap();
        let expected = Field::from_fn(*up.grid(), f).unwrap();
        assert!(up.sub(&expected).unwrap().max_abs() < 1e-12);
        let p = integral_power_padded(&u, 4).unwrap();
        let q = integral_power(&expected, 4);
        assert!((p - q).abs() < 1e-12 * q);
    }

    #[test]
    fn evenness_tools() {
        let g = line(32, 8.0);
        let u = Field::from_fn(g, |x| x[0] + x[0] * x[0]).unwrap();
        assert!(u.evenness_defect() > 1.0);
        let e = u.symmetrize_even();
        assert!(e.evenness_defect() < 1e-15);
    }
}
