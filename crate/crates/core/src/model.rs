//! Stationary systems, their energies, Nehari functionals and gradients.
//!
//! Every supported system has the form
//!
//! ```text
//! Φ(𝐮) = ½ Σⱼ ‖uⱼ‖²_{λⱼ} − Σᵢ cᵢ ∫ Πⱼ uⱼ^{eᵢⱼ} dx
//! ```
//!
//! with monomials of total degree 3 or 4, so the three variants (and the
//! scalar problems used for the semi-trivial states) share one
//! implementation in [`Functional`] / [`Model`].

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::{check_exponent, integral_power, inner_l2, Field, FracLaplacian, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `(u, v)`: cubic NLS component coupled to a quadratic KdV component.
    TwoEq,
    /// `(u, v₁, …, v_{N−1})`: one cubic component coupled to N−1 quadratic ones.
    StarNEq,
    /// `(u₁, u₂, v)`: two cubic components and one quadratic component.
    TwoNlfsFkdv,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::TwoEq => "two_eq",
            Variant::StarNEq => "star_n_eq",
            Variant::TwoNlfsFkdv => "two_nlfs_fkdv",
        }
    }
}

/// Model constants.
///
/// * `TwoEq`: `lambdas = [λ₁, λ₂]`, `betas = [β]`.
/// * `StarNEq`: `lambdas = [λ₀, λ₁, …, λ_{N−1}]`, `betas = [β₁, …, β_{N−1}]`.
/// * `TwoNlfsFkdv`: `lambdas = [λ₁, λ₂, λ]`, `betas = [β₁₂, β₁₃, β₂₃]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub s: f64,
    pub n: usize,
    pub variant: Variant,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
}

pub fn check_s_for_dimension(s: f64, n: usize) -> Result<()> {
    check_exponent(s)?;
    if !(1..=3).contains(&n) {
        return Err(Error::ParameterDomain(format!("dimension must be 1, 2 or 3, got {n}")));
    }
    if s <= n as f64 / 4.0 {
        return Err(Error::ParameterDomain(format!(
            "s = {s} must exceed n/4 = {} so the quartic term stays subcritical",
            n as f64 / 4.0
        )));
    }
    Ok(())
}

impl SystemParams {
    pub fn two_eq(s: f64, n: usize, lambda1: f64, lambda2: f64, beta: f64) -> Result<Self> {
        let p = SystemParams {
            s,
            n,
            variant: Variant::TwoEq,
            lambdas: vec![lambda1, lambda2],
            betas: vec![beta],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn star(s: f64, n: usize, lambdas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let p = SystemParams {
            s,
            n,
            variant: Variant::StarNEq,
            lambdas,
            betas,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn two_nlfs_fkdv(s: f64, n: usize, lambdas: [f64; 3], betas: [f64; 3]) -> Result<Self> {
        let p = SystemParams {
            s,
            n,
            variant: Variant::TwoNlfsFkdv,
            lambdas: lambdas.to_vec(),
            betas: betas.to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_s_for_dimension(self.s, self.n)?;
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::ParameterDomain(format!("every lambda must be positive, got {l}")));
        }
        if self.betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::ParameterDomain("betas must be finite".into()));
        }
        let (nl, nb) = (self.lambdas.len(), self.betas.len());
        let ok = match self.variant {
            Variant::TwoEq => nl == 2 && nb == 1,
            Variant::StarNEq => nl >= 2 && nb == nl - 1,
            Variant::TwoNlfsFkdv => nl == 3 && nb == 3,
        };
        if !ok {
            return Err(Error::VariantMismatch(format!(
                "{} expects matching lambda/beta counts, got {nl} lambdas and {nb} betas",
                self.variant.as_str()
            )));
        }
        Ok(())
    }

    pub fn components(&self) -> usize {
        self.lambdas.len()
    }

    /// The coupling β of the two-equation system.
    pub fn beta(&self) -> f64 {
        self.betas[0]
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut p = self.clone();
        p.betas[0] = beta;
        p
    }

    pub fn functional(&self) -> Functional {
        let nc = self.components();
        let unit = |j: usize, e: u32| {
            let mut v = vec![0; nc];
            v[j] = e;
            v
        };
        let mut terms = Vec::new();
        match self.variant {
            Variant::TwoEq => {
                terms.push(Term::new(0.25, vec![4, 0]));
                terms.push(Term::new(1.0 / 6.0, vec![0, 3]));
                terms.push(Term::new(0.5 * self.betas[0], vec![2, 1]));
            }
            Variant::StarNEq => {
                terms.push(Term::new(0.25, unit(0, 4)));
                for j in 1..nc {
                    terms.push(Term::new(1.0 / 6.0, unit(j, 3)));
                }
                for (j, &b) in self.betas.iter().enumerate() {
                    let mut e = unit(0, 2);
                    e[j + 1] = 1;
                    terms.push(Term::new(0.5 * b, e));
                }
            }
            Variant::TwoNlfsFkdv => {
                let [b12, b13, b23] = [self.betas[0], self.betas[1], self.betas[2]];
                terms.push(Term::new(0.25, vec![4, 0, 0]));
                terms.push(Term::new(0.25, vec![0, 4, 0]));
                terms.push(Term::new(1.0 / 6.0, vec![0, 0, 3]));
                terms.push(Term::new(0.25 * b12, vec![2, 2, 0]));
                terms.push(Term::new(0.5 * b13, vec![2, 0, 1]));
                terms.push(Term::new(0.5 * b23, vec![0, 2, 1]));
            }
        }
        Functional {
            lambdas: self.lambdas.clone(),
            terms,
        }
    }
}

/// `coef · ∫ Πⱼ uⱼ^{exps[j]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub exps: Vec<u32>,
}

impl Term {
    pub fn new(coef: f64, exps: Vec<u32>) -> Self {
        Term { coef, exps }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    fn density(&self, state: &CoupledState, i: usize) -> f64 {
        self.exps
            .iter()
            .zip(&state.components)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, f)| f.values()[i].powi(e as i32))
            .product()
    }

    /// Pointwise `∂/∂u_j` of the monomial density.
    fn partial(&self, state: &CoupledState, j: usize, i: usize) -> f64 {
        let ej = self.exps[j];
        if ej == 0 {
            return 0.0;
        }
        let mut out = ej as f64 * state.components[j].values()[i].powi(ej as i32 - 1);
        for (k, (&e, f)) in self.exps.iter().zip(&state.components).enumerate() {
            if k != j && e > 0 {
                out *= f.values()[i].powi(e as i32);
            }
        }
        out
    }
}

/// Quadratic part weights plus the nonlinear monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub lambdas: Vec<f64>,
    pub terms: Vec<Term>,
}

impl Functional {
    /// `½‖u‖²_λ − (c/p) ∫ uᵖ`, whose Euler–Lagrange equation is
    /// `(−Δ)^s u + λu = c·u^{p−1}`.
    pub fn scalar(lambda: f64, degree: u32, coefficient: f64) -> Self {
        Functional {
            lambdas: vec![lambda],
            terms: vec![Term::new(coefficient / degree as f64, vec![degree])],
        }
    }

    pub fn components(&self) -> usize {
        self.lambdas.len()
    }

    /// Components on which every monomial has an even exponent, so `Φ` is
    /// invariant under `uⱼ ↦ −uⱼ`.
    pub fn sign_symmetric(&self, j: usize) -> bool {
        self.terms.iter().all(|t| t.exps[j] % 2 == 0)
    }

    pub fn all_couplings_nonnegative(&self) -> bool {
        self.terms.iter().all(|t| t.coef >= 0.0)
    }
}

/// Ordered tuple of fields on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    components: Vec<Field>,
}

impl CoupledState {
    pub fn new(components: Vec<Field>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::VariantMismatch("state has no components".into()))?;
        for c in &components[1..] {
            first.check_same_grid(c)?;
        }
        Ok(CoupledState { components })
    }

    pub fn zeros(grid: GridSpec, count: usize) -> Self {
        CoupledState {
            components: vec![Field::zeros(grid); count],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &Field {
        &self.components[j]
    }

    pub fn into_components(self) -> Vec<Field> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn scale(&self, t: f64) -> Self {
        CoupledState {
            components: self.components.iter().map(|f| f.scale(t)).collect(),
        }
    }

    pub fn map_components(&self, mut f: impl FnMut(usize, &Field) -> Field) -> Self {
        CoupledState {
            components: self.components.iter().enumerate().map(|(j, c)| f(j, c)).collect(),
        }
    }

    pub fn lin_comb(&self, a: f64, other: &CoupledState, b: f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::VariantMismatch("component counts differ".into()));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.lin_comb(a, y, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoupledState { components })
    }

    /// `Σⱼ ∫ uⱼ vⱼ`.
    pub fn inner_l2(&self, other: &CoupledState) -> Result<f64> {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| inner_l2(x, y))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(Field::max_abs).fold(0.0, f64::max)
    }
}

/// Energy split; every field is a plain number.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub phi: f64,
    /// `½‖𝐮‖²`
    pub quadratic_part: f64,
    pub g_beta: f64,
    pub nehari_psi: f64,
    pub reduced_f: f64,
    /// `‖uⱼ‖²_{λⱼ}`
    pub norms_sq: Vec<f64>,
    pub int_p2: Vec<f64>,
    pub int_p3: Vec<f64>,
    pub int_p4: Vec<f64>,
}

impl EnergyBreakdown {
    /// `‖𝐮‖²`.
    pub fn norm_sq(&self) -> f64 {
        2.0 * self.quadratic_part
    }

    /// Key names of the flat JSON form, in emission order.
    pub fn json_keys(components: usize) -> Vec<String> {
        let mut keys: Vec<String> = ["phi", "quadratic_part", "g_beta", "nehari_psi", "reduced_f"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["norm_sq", "int_p2", "int_p3", "int_p4"] {
            for j in 0..components {
                keys.push(format!("{prefix}_{j}"));
            }
        }
        keys
    }

    fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("phi".to_string(), self.phi),
            ("quadratic_part".to_string(), self.quadratic_part),
            ("g_beta".to_string(), self.g_beta),
            ("nehari_psi".to_string(), self.nehari_psi),
            ("reduced_f".to_string(), self.reduced_f),
        ];
        for (prefix, values) in [
            ("norm_sq", &self.norms_sq),
            ("int_p2", &self.int_p2),
            ("int_p3", &self.int_p3),
            ("int_p4", &self.int_p4),
        ] {
            for (j, v) in values.iter().enumerate() {
                out.push((format!("{prefix}_{j}"), *v));
            }
        }
        out
    }
}

impl Serialize for EnergyBreakdown {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut map = serializer.serialize_map(Some(entries.len()))?;
        for (k, v) in &entries {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// Integrals needed for the ray structure `Ψ(t𝐮) = t²Q − 3t³C₃ − 4t⁴C₄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayParts {
    /// `‖𝐮‖²`
    pub q: f64,
    /// `Σ cᵢ ∫(monomial)` over cubic monomials
    pub c3: f64,
    /// same over quartic monomials
    pub c4: f64,
}

impl RayParts {
    pub fn psi(&self) -> f64 {
        self.q - 3.0 * self.c3 - 4.0 * self.c4
    }

    /// `d/dt Ψ(t𝐮)` at `t = 1`, i.e. `(∇Ψ(𝐮)|𝐮)`.
    pub fn psi_ray_derivative(&self) -> f64 {
        2.0 * self.q - 9.0 * self.c3 - 16.0 * self.c4
    }
}

/// A functional bound to a discretization.
#[derive(Debug, Clone)]
pub struct Model {
    functional: Functional,
    op: FracLaplacian,
}

impl Model {
    pub fn new(functional: Functional, grid: GridSpec, s: f64) -> Result<Self> {
        for t in &functional.terms {
            if t.exps.len() != functional.components() {
                return Err(Error::VariantMismatch("monomial arity differs from component count".into()));
            }
            if !(3..=4).contains(&t.degree()) {
                return Err(Error::Unsupported(format!("monomial degree {} not in {{3, 4}}", t.degree())));
            }
        }
        Ok(Model {
            functional,
            op: FracLaplacian::new(grid, s)?,
        })
    }

    pub fn for_params(params: &SystemParams, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        if grid.n != params.n {
            return Err(Error::ParameterDomain(format!(
                "grid dimension {} differs from system dimension {}",
                grid.n, params.n
            )));
        }
        Self::new(params.functional(), grid, params.s)
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn operator(&self) -> &FracLaplacian {
        &self.op
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }

    pub fn check_state(&self, state: &CoupledState) -> Result<()> {
        if state.len() != self.functional.components() {
            return Err(Error::VariantMismatch(format!(
                "expected {} components, got {}",
                self.functional.components(),
                state.len()
            )));
        }
        if state.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn monomial_integral(&self, term: &Term, state: &CoupledState) -> f64 {
        let h = self.grid().cell_volume();
        h * (0..self.grid().total_points()).map(|i| term.density(state, i)).sum::<f64>()
    }

    pub fn ray_parts(&self, state: &CoupledState) -> Result<RayParts> {
        self.check_state(state)?;
        let mut q = 0.0;
        for (f, &l) in state.components.iter().zip(&self.functional.lambdas) {
            q += self.op.norm_sq(f, l)?;
        }
        let (mut c3, mut c4) = (0.0, 0.0);
        for t in &self.functional.terms {
            if t.coef == 0.0 {
                continue;
            }
            let m = t.coef * self.monomial_integral(t, state);
            if t.degree() == 3 {
                c3 += m;
            } else {
                c4 += m;
            }
        }
        Ok(RayParts { q, c3, c4 })
    }

    pub fn energy(&self, state: &CoupledState) -> Result<EnergyBreakdown> {
        self.check_state(state)?;
        let norms_sq = state
            .components
            .iter()
            .zip(&self.functional.lambdas)
            .map(|(f, &l)| self.op.norm_sq(f, l))
            .collect::<Result<Vec<_>>>()?;
        let q: f64 = norms_sq.iter().sum();
        let (mut c3, mut c4) = (0.0, 0.0);
        for t in &self.functional.terms {
            if t.coef == 0.0 {
                continue;
            }
            let m = t.coef * self.monomial_integral(t, state);
            if t.degree() == 3 {
                c3 += m;
            } else {
                c4 += m;
            }
        }
        let parts = RayParts { q, c3, c4 };
        let g_beta = c3 + c4;
        Ok(EnergyBreakdown {
            phi: 0.5 * q - g_beta,
            quadratic_part: 0.5 * q,
            g_beta,
            nehari_psi: parts.psi(),
            reduced_f: q / 6.0 + c4 / 3.0,
            norms_sq,
            int_p2: state.components.iter().map(|f| integral_power(f, 2)).collect(),
            int_p3: state.components.iter().map(|f| integral_power(f, 3)).collect(),
            int_p4: state.components.iter().map(|f| integral_power(f, 4)).collect(),
        })
    }

    pub fn phi(&self, state: &CoupledState) -> Result<f64> {
        let p = self.ray_parts(state)?;
        Ok(0.5 * p.q - p.c3 - p.c4)
    }

    pub fn psi(&self, state: &CoupledState) -> Result<f64> {
        Ok(self.ray_parts(state)?.psi())
    }

    /// `Σ_{deg} weight(deg)·cᵢ ∂(monomial)/∂uⱼ` for every component.
    fn nonlinear_gradient(&self, state: &CoupledState, weight: impl Fn(u32) -> f64) -> Vec<Field> {
        let grid = *self.grid();
        (0..state.len())
            .map(|j| {
                let vals = (0..grid.total_points())
                    .map(|i| {
                        self.functional
                            .terms
                            .iter()
                            .filter(|t| t.coef != 0.0 && t.exps[j] > 0)
                            .map(|t| weight(t.degree()) * t.coef * t.partial(state, j, i))
                            .sum()
                    })
                    .collect();
                Field::from_raw(grid, vals)
            })
            .collect()
    }

    fn linear_part(&self, state: &CoupledState, factor: f64) -> Result<Vec<Field>> {
        state
            .components
            .iter()
            .zip(&self.functional.lambdas)
            .map(|(f, &l)| Ok(self.op.apply_shifted(f, l)?.scale(factor)))
            .collect()
    }

    /// L² gradient of `Φ`, i.e. the Euler–Lagrange residual.
    pub fn gradient(&self, state: &CoupledState) -> Result<CoupledState> {
        self.check_state(state)?;
        let lin = self.linear_part(state, 1.0)?;
        let nl = self.nonlinear_gradient(state, |_| 1.0);
        let comps = lin.iter().zip(&nl).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Ok(CoupledState { components: comps })
    }

    /// L² gradient of `Ψ`.
    pub fn psi_gradient(&self, state: &CoupledState) -> Result<CoupledState> {
        self.check_state(state)?;
        let lin = self.linear_part(state, 2.0)?;
        let nl = self.nonlinear_gradient(state, |d| d as f64);
        let comps = lin.iter().zip(&nl).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Ok(CoupledState { components: comps })
    }

    /// `((−Δ)^s + λⱼ)^{-1}` applied per component.
    pub fn precondition(&self, state: &CoupledState) -> Result<CoupledState> {
        let comps = state
            .components
            .iter()
            .zip(&self.functional.lambdas)
            .map(|(f, &l)| self.op.solve_shifted(f, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoupledState { components: comps })
    }

    /// Positive `t` with `Ψ(t𝐮) = 0`, i.e. the root of `A t² + B t − Q = 0`
    /// with `A = 4C₄`, `B = 3C₃`.
    pub fn nehari_scaling(&self, state: &CoupledState) -> Result<f64> {
        nehari_root(&self.ray_parts(state)?)
    }

    pub fn project(&self, state: &CoupledState) -> Result<(f64, CoupledState)> {
        let t = self.nehari_scaling(state)?;
        Ok((t, state.scale(t)))
    }
}

/// Root selection for `A t² + B t = Q`.
pub fn nehari_root(parts: &RayParts) -> Result<f64> {
    let a = 4.0 * parts.c4;
    let b = 3.0 * parts.c3;
    let q = parts.q;
    let fail = Err(Error::ProjectionFailure { quartic: a, cubic: b });
    if !(q > 0.0) {
        return fail;
    }
    let scale = q.max(a.abs()).max(b.abs());
    if a.abs() <= 1e-300 * scale.max(1.0) || a.abs() < 1e-14 * b.abs() {
        if b > 0.0 {
            return Ok(q / b);
        }
        return fail;
    }
    let disc = b * b + 4.0 * a * q;
    if disc < 0.0 {
        return fail;
    }
    let sq = disc.sqrt();
    if a > 0.0 {
        // stable form of (−B + √disc)/(2A)
        return Ok(if b >= 0.0 { 2.0 * q / (b + sq) } else { (sq - b) / (2.0 * a) });
    }
    // A < 0: two positive roots when B > 0; the smaller is where Φ peaks on the ray
    if b > 0.0 {
        Ok(2.0 * q / (b + sq))
    } else {
        fail
    }
}

fn model_for(params: &SystemParams, state: &CoupledState) -> Result<Model> {
    let model = Model::for_params(params, *state.grid())?;
    model.check_state(state)?;
    Ok(model)
}

pub fn energy_phi(params: &SystemParams, state: &CoupledState) -> Result<EnergyBreakdown> {
    model_for(params, state)?.energy(state)
}

pub fn nehari_psi(params: &SystemParams, state: &CoupledState) -> Result<f64> {
    model_for(params, state)?.psi(state)
}

pub fn gradient_phi(params: &SystemParams, state: &CoupledState) -> Result<CoupledState> {
    model_for(params, state)?.gradient(state)
}

/// `⅙‖𝐮‖² + (1/12)∫u⁴`; equals `Φ` on the Nehari manifold.
pub fn reduced_f(params: &SystemParams, state: &CoupledState) -> Result<f64> {
    if params.variant == Variant::TwoNlfsFkdv {
        return Err(Error::Unsupported(
            "reduced functional of the three-component cubic system is exploratory; use reduced_f_exploratory".into(),
        ));
    }
    Ok(model_for(params, state)?.energy(state)?.reduced_f)
}

/// Same identity for any variant, including the two-cubic-component system.
pub fn reduced_f_exploratory(params: &SystemParams, state: &CoupledState) -> Result<f64> {
    Ok(model_for(params, state)?.energy(state)?.reduced_f)
}
