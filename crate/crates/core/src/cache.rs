//! Scalar ground-state cache: in-process map plus an optional
//! content-addressed directory (`NEHARI_CACHE_DIR`).

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};

use log::{debug, warn};

use crate::io;
use crate::spectral::{Field, GridSpec};

pub const CACHE_ENV: &str = "NEHARI_CACHE_DIR";

/// Identifies a scalar problem `(−Δ)^s u + λu = c·u^{p−1}` on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarKey {
    pub s: f64,
    pub lambda: f64,
    pub coefficient: f64,
    pub degree: u32,
    pub grid: GridSpec,
}

impl ScalarKey {
    /// Canonical text form; floats use their shortest round-trip repr.
    pub fn canonical(&self) -> String {
        format!(
            "s={:?};n={};lambda={:?};c={:?};p={};L={:?};N={};symbol={}",
            self.s,
            self.grid.n,
            self.lambda,
            self.coefficient,
            self.degree,
            self.grid.box_length,
            self.grid.points_per_dim,
            self.grid.symbol.as_str()
        )
    }

    pub fn digest(&self) -> String {
        io::sha256_hex(self.canonical().as_bytes())
    }
}

fn memory() -> &'static Mutex<HashMap<String, Field>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Field>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn disk_path(key: &ScalarKey) -> Option<PathBuf> {
    cache_dir().map(|d| d.join(format!("{}.nhf", key.digest())))
}

/// Returns a cached field if present and accepted by `validate`.
pub fn lookup(key: &ScalarKey, validate: impl Fn(&Field) -> bool) -> Option<Field> {
    let canonical = key.canonical();
    if let Some(f) = memory().lock().unwrap().get(&canonical) {
        return Some(f.clone());
    }
    let path = disk_path(key)?;
    if !path.exists() {
        return None;
    }
    match io::read_field(&path) {
        Ok((field, meta)) if *field.grid() == key.grid && meta.s == key.s => {
            if validate(&field) {
                memory().lock().unwrap().insert(canonical, field.clone());
                Some(field)
            } else {
                warn!("cached state {} failed residual validation", path.display());
                None
            }
        }
        Ok(_) => None,
        Err(e) => {
            warn!("unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

pub fn store(key: &ScalarKey, field: &Field) {
    memory().lock().unwrap().insert(key.canonical(), field.clone());
    if let Some(path) = disk_path(key) {
        if let Err(e) = io::write_field(&path, field, key.s) {
            warn!("could not write cache entry {}: {e}", path.display());
        } else {
            debug!("cached {} at {}", key.canonical(), path.display());
        }
    }
}
