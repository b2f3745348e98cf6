//! Versioned JSON configuration.
//!
//! A config file is overlaid on the defaults of the subcommand; objects
//! merge key by key, everything else is replaced. Keys absent from the
//! default tree are rejected, all of them listed in one error.

use std::path::Path;

use nehari_core::experiments::{ExperimentConfig, NSystemMode, SweepParam, Th2Options};
use nehari_core::{GridSpec, SolveOptions, SymbolKind, SystemParams, Variant};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub points_per_dim: usize,
    pub box_length: f64,
    pub symbol: SymbolKind,
}

/// Problem `(−Δ)^s u + λu = c·u^{p−1}` for `solve-scalar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarConfig {
    pub lambda: f64,
    pub coefficient: f64,
    pub degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub s: f64,
    pub n: usize,
    pub variant: Variant,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub grid: GridConfig,
    pub solver: SolveOptions,
    pub guesses: usize,
    pub scalar: ScalarConfig,
    pub th2: Th2Options,
    pub n_system_mode: NSystemMode,
    pub sweep: SweepConfig,
}

/// Which family of defaults a subcommand starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defaults {
    TwoEq,
    Star,
    TwoNlfsFkdv,
}

impl Config {
    pub fn defaults(kind: Defaults) -> Self {
        let (variant, lambdas, betas) = match kind {
            Defaults::TwoEq => (Variant::TwoEq, vec![1.0, 1.0], vec![10.0]),
            Defaults::Star => (Variant::StarNEq, vec![1.0; 3], vec![10.0, 10.0]),
            Defaults::TwoNlfsFkdv => (Variant::TwoNlfsFkdv, vec![1.0; 3], vec![1.0, 1.0, 1.0]),
        };
        Config {
            version: CONFIG_VERSION,
            s: 0.5,
            n: 1,
            variant,
            lambdas,
            betas,
            grid: GridConfig {
                points_per_dim: 8192,
                box_length: 200.0,
                symbol: SymbolKind::Continuum,
            },
            solver: SolveOptions::default(),
            guesses: 4,
            scalar: ScalarConfig {
                lambda: 1.0,
                coefficient: 1.0,
                degree: 3,
            },
            th2: Th2Options::default(),
            n_system_mode: NSystemMode::BetaAboveThresholds,
            sweep: SweepConfig {
                param: SweepParam::Beta,
                values: vec![0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            },
        }
    }

    pub fn params(&self) -> nehari_core::Result<SystemParams> {
        let p = SystemParams {
            s: self.s,
            n: self.n,
            variant: self.variant,
            lambdas: self.lambdas.clone(),
            betas: self.betas.clone(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> nehari_core::Result<GridSpec> {
        GridSpec::new(self.n, self.grid.points_per_dim, self.grid.box_length, self.grid.symbol)
    }

    pub fn experiment(&self) -> nehari_core::Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            params: self.params()?,
            grid: self.grid()?,
            opts: self.solver.clone(),
            guesses: self.guesses,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Dotted paths of keys in `given` that `reference` does not have.
pub fn unknown_keys(given: &Value, reference: &Value) -> Vec<String> {
    let mut out = Vec::new();
    collect_unknown(given, reference, "", &mut out);
    out
}

fn collect_unknown(given: &Value, reference: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(g), Value::Object(r)) = (given, reference) else {
        return;
    };
    for (k, v) in g {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match r.get(k) {
            None => out.push(path),
            Some(rv) => collect_unknown(v, rv, &path, out),
        }
    }
}

fn overlay(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `text` over `defaults`.
pub fn parse(text: &str, defaults: &Config) -> Result<Config, String> {
    let given: Value = serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    if !given.is_object() {
        return Err("config must be a JSON object".into());
    }
    match given.get("version") {
        Some(Value::Number(v)) if v.as_u64() == Some(CONFIG_VERSION as u64) => {}
        Some(v) => return Err(format!("unsupported config version {v}; expected {CONFIG_VERSION}")),
        None => return Err(format!("config lacks the \"version\" key (current version is {CONFIG_VERSION})")),
    }
    let mut base = serde_json::to_value(defaults).map_err(|e| e.to_string())?;
    let unknown = unknown_keys(&given, &base);
    if !unknown.is_empty() {
        return Err(format!("unknown config keys: {}", unknown.join(", ")));
    }
    overlay(&mut base, given);
    serde_json::from_value(base).map_err(|e| format!("invalid config: {e}"))
}

pub fn load(path: &Path, defaults: &Config) -> Result<Config, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse(&text, defaults)
}
