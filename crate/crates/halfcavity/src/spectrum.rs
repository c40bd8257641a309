//! Spectral density of the photonic environment seen by the atom:
//! J(Δ) = (γ/π) sin²(t_d Δ/2 + φ/2), with Δ the atom-photon detuning.
//!
//! The delay sets the oscillation period 2π/t_d of the density while the
//! phase slides it across resonance; at t_d = 0 the density is flat, the
//! memoryless limit. The closed form assumes the linearized dispersion
//! υ(k - k₀) = Δ, valid over a band broader than both γ and 1/t_d.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// One sample of the spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    /// Detuning Δ = ω − ω₀, in units of 1/time.
    pub detuning: f64,
    /// J(Δ) ∈ [0, γ/π], in units of 1/time.
    pub density: f64,
}

/// J(Δ) = (γ/π) sin²(t_d Δ/2 + φ/2).
pub fn spectral_density(params: &ModelParams, detuning: f64) -> Result<f64> {
    if !detuning.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "detuning must be finite, got {detuning}"
        )));
    }
    let s = (0.5 * params.t_d() * detuning + 0.5 * params.phi()).sin();
    Ok(params.gamma() / std::f64::consts::PI * s * s)
}

/// Tabulate the spectral density on a uniform inclusive grid.
pub fn spectrum_scan(
    params: &ModelParams,
    delta_min: f64,
    delta_max: f64,
    n_points: usize,
) -> Result<Vec<SpectralPoint>> {
    if !delta_min.is_finite() || !delta_max.is_finite() || delta_min >= delta_max {
        return Err(Error::InvalidParameter(format!(
            "scan range must satisfy delta_min < delta_max, got [{delta_min}, {delta_max}]"
        )));
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter(format!(
            "scan needs at least 2 points, got {n_points}"
        )));
    }
    let step = (delta_max - delta_min) / (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            let detuning = if i == n_points - 1 {
                delta_max
            } else {
                delta_min + i as f64 * step
            };
            Ok(SpectralPoint {
                detuning,
                density: spectral_density(params, detuning)?,
            })
        })
        .collect()
}
