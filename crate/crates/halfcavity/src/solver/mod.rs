//! Amplitude solvers: exact finite series, method-of-steps integration of
//! the delay equation, and the memoryless small-delay limit. The series and
//! the integrator are independent routes to the same function and
//! cross-validate each other.

mod mos;
mod series;

pub use mos::{amplitude_mos, AmplitudeTrajectory, MIN_MESH_PER_DELAY};
pub use series::{amplitude_series, SeriesEvaluator};

pub(crate) use mos::{segments_for_horizon, MosStepper, SegmentBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default mesh density per delay segment; enough for 1e-6 global agreement
/// with the exact series.
pub const DEFAULT_MESH_PER_DELAY: usize = 512;

/// Amplitude in the vanishing-delay limit, where the feedback acts
/// instantaneously and the equation becomes local:
/// ε(t) = exp[(γ/2)(e^{iφ} - 1) t].
///
/// The decay rate γ(1 - cos φ) interpolates between no decay at φ = 2nπ and
/// twice the bare rate at φ = (2n+1)π.
pub fn lindblad_amplitude(gamma: f64, phi: f64, t: f64) -> Result<Complex64> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be non-negative and finite, got {gamma}"
        )));
    }
    if !phi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phase must be finite, got {phi}"
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be non-negative and finite, got {t}"
        )));
    }
    let exponent = (Complex64::from_polar(1.0, phi) - 1.0) * (0.5 * gamma * t);
    Ok(exponent.exp())
}
