//! Dispersion relations of the real fourth-order Schrödinger (RS) equation
//! and of gravity-capillary (GC) surface waves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::params::HydroParams;

/// Shallow-water approximation is considered valid up to this `kH`.
pub const SHALLOW_LIMIT_KH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionKind {
    RsNormalized,
    GcFull,
    GcShallow,
    CapillaryOnly,
}

/// Sampled `ω(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub kind: DispersionKind,
    pub wavenumbers: Vec<f64>,
    pub omegas: Vec<f64>,
}

impl DispersionCurve {
    pub fn sample(
        kind: DispersionKind,
        wavenumbers: Vec<f64>,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let omegas = wavenumbers.iter().map(|&k| f(k)).collect::<Result<_>>()?;
        Ok(Self {
            kind,
            wavenumbers,
            omegas,
        })
    }
}

/// Normalized RS dispersion `ω² = k⁴ + εk² + ε²/4`, evaluated as the exact
/// root `k² + ε/2`.
pub fn rs_omega(k: f64, epsilon: f64) -> f64 {
    k * k + 0.5 * epsilon
}

fn require_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(invalid("k", format!("wavenumber must be > 0, got {k}")))
    }
}

/// Full-depth GC dispersion `ω² = tanh(kH)((σ/ρ)k³ + gk)`.
pub fn gc_omega_full(k: f64, h: &HydroParams) -> Result<f64> {
    require_k(k)?;
    let s = h.sigma_over_rho();
    Ok(((k * h.depth).tanh() * (s * k.powi(3) + h.g * k)).sqrt())
}

/// Shallow-water GC dispersion `ω² = (σH/ρ)k⁴ + gHk²`.
///
/// Unlike [`HydroParams::validate`], `g = 0` is accepted here to give the
/// capillary-only limit.
pub fn gc_omega_shallow(k: f64, h: &HydroParams) -> Result<f64> {
    require_k(k)?;
    let s = h.sigma_over_rho();
    Ok((s * h.depth * k.powi(4) + h.g * h.depth * k * k).sqrt())
}

/// Capillary-only shallow dispersion `ω = √(σH/ρ) k²`.
pub fn capillary_only_omega(k: f64, h: &HydroParams) -> Result<f64> {
    require_k(k)?;
    Ok((h.sigma_over_rho() * h.depth).sqrt() * k * k)
}

/// Box eigen-wavenumbers `πn/L` for `n = 1..=n_max`.
pub fn box_eigen_wavenumbers(box_length: f64, n_max: usize) -> Vec<f64> {
    (1..=n_max).map(|n| PI * n as f64 / box_length).collect()
}
