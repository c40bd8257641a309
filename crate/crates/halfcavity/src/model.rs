//! Physical parameters of the emitter-mirror system, the atomic qubit state
//! and the amplitude-damping evolution map.
//!
//! The reduced state of the atom evolves under a one-parameter channel: given
//! the excited-state amplitude ε(t), populations scale by |ε|² and coherences
//! by ε*. Everything downstream of this module only ever needs the complex
//! number ε.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed when checking |ρ_ge|² ≤ ρ_ee(1 − ρ_ee); strict inequality
/// fails under floating-point accumulation.
pub const POSITIVITY_TOL: f64 = 1e-12;

/// Slack allowed on |ε| ≤ 1 for amplitudes produced by the integrator.
pub const AMPLITUDE_TOL: f64 = 1e-9;

/// Reduce a phase to the canonical interval [0, 2π).
///
/// The dynamics is 2π-periodic in the phase, so the canonical representative
/// generates the same evolution as the input.
pub fn canonicalize_phase(phi: f64) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phase must be finite, got {phi}"
        )));
    }
    let mut r = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if r >= TAU {
        r = 0.0;
    }
    Ok(r)
}

/// The three physical parameters of the model: spontaneous emission rate γ,
/// mirror round-trip delay t_d and round-trip optical phase φ.
///
/// After rescaling time by γ the dynamics depends only on (γ·t_d, φ); both
/// the raw rate and delay are kept so callers may work in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    gamma: f64,
    t_d: f64,
    phi: f64,
    dimensionless_delay: f64,
}

impl ModelParams {
    /// Validate and build a parameter set. The phase is canonicalized to
    /// [0, 2π); γ must be positive and t_d non-negative.
    pub fn new(gamma: f64, t_d: f64, phi: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive and finite, got {gamma}"
            )));
        }
        if !t_d.is_finite() || t_d < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "t_d must be non-negative and finite, got {t_d}"
            )));
        }
        let phi = canonicalize_phase(phi)?;
        Ok(Self {
            gamma,
            t_d,
            phi,
            dimensionless_delay: gamma * t_d,
        })
    }

    /// Parameter set in rescaled units: γ = 1, delay given as γ·t_d.
    pub fn dimensionless(gamma_t_d: f64, phi: f64) -> Result<Self> {
        Self::new(1.0, gamma_t_d, phi)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn t_d(&self) -> f64 {
        self.t_d
    }

    /// Canonical phase in [0, 2π).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// γ·t_d, cached at construction.
    pub fn dimensionless_delay(&self) -> f64 {
        self.dimensionless_delay
    }

    /// True when the canonical phase sits exactly on the atom-photon
    /// bound-state condition φ = 2nπ, where part of the excitation stays
    /// trapped and the amplitude does not decay to zero.
    pub fn is_bound_state_phase(&self) -> bool {
        self.phi == 0.0
    }
}

/// Excited-state amplitude ε, validated to |ε| ≤ 1 (within tolerance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitude(Complex64);

impl Amplitude {
    pub fn new(value: Complex64) -> Result<Self> {
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be finite, got {value}"
            )));
        }
        if value.norm_sqr() > 1.0 + AMPLITUDE_TOL {
            return Err(Error::InvalidParameter(format!(
                "amplitude modulus exceeds 1: |{value}| = {}",
                value.norm()
            )));
        }
        Ok(Self(value))
    }

    /// The initial condition ε(0) = 1.
    pub fn one() -> Self {
        Self(Complex64::new(1.0, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }
}

/// Atomic density matrix, stored as the excited population and one
/// off-diagonal entry. ρ_gg = 1 − ρ_ee and ρ_eg = ρ_ge* are derived, which
/// enforces unit trace and Hermiticity by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    rho_ee: f64,
    rho_ge: Complex64,
}

impl QubitState {
    /// Validate and build a state: ρ_ee ∈ [0, 1] and |ρ_ge|² ≤ ρ_ee(1 − ρ_ee)
    /// up to [`POSITIVITY_TOL`].
    pub fn new(rho_ee: f64, rho_ge: Complex64) -> Result<Self> {
        if !rho_ee.is_finite() || !(0.0..=1.0).contains(&rho_ee) {
            return Err(Error::InvalidState(format!(
                "excited population must lie in [0, 1], got {rho_ee}"
            )));
        }
        if !rho_ge.re.is_finite() || !rho_ge.im.is_finite() {
            return Err(Error::InvalidState(format!(
                "coherence must be finite, got {rho_ge}"
            )));
        }
        let bound = rho_ee * (1.0 - rho_ee);
        if rho_ge.norm_sqr() > bound + POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "positivity violated: |rho_ge|^2 = {} > rho_ee(1 - rho_ee) = {bound}",
                rho_ge.norm_sqr()
            )));
        }
        Ok(Self { rho_ee, rho_ge })
    }

    /// |g⟩⟨g|.
    pub fn ground() -> Self {
        Self {
            rho_ee: 0.0,
            rho_ge: Complex64::new(0.0, 0.0),
        }
    }

    /// |e⟩⟨e|.
    pub fn excited() -> Self {
        Self {
            rho_ee: 1.0,
            rho_ge: Complex64::new(0.0, 0.0),
        }
    }

    pub fn rho_ee(&self) -> f64 {
        self.rho_ee
    }

    pub fn rho_gg(&self) -> f64 {
        1.0 - self.rho_ee
    }

    pub fn rho_ge(&self) -> Complex64 {
        self.rho_ge
    }

    pub fn rho_eg(&self) -> Complex64 {
        self.rho_ge.conj()
    }

    /// Apply the amplitude-damping map: ρ_ee ↦ |ε|² ρ_ee, ρ_ge ↦ ε* ρ_ge,
    /// with the population lost from ρ_ee moved to ρ_gg.
    pub fn evolve(&self, eps: Amplitude) -> QubitState {
        let e = eps.value();
        QubitState {
            rho_ee: e.norm_sqr() * self.rho_ee,
            rho_ge: e.conj() * self.rho_ge,
        }
    }
}
