//! Ground states of coupled fractional dispersive systems by constrained
//! minimization on the Nehari manifold, on a periodic pseudospectral grid.

pub mod cache;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod nehari;
pub mod scalar_gs;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{CoupledState, EnergyBreakdown, Model, SystemParams, Variant};
pub use nehari::{SolveOptions, SolveResult};
pub use spectral::{Field, FracLaplacian, GridSpec, SymbolKind};
