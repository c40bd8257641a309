//! Exact open dynamics of a two-level emitter in front of a mirror in a
//! one-dimensional waveguide, and the non-Markovianity of that dynamics.
//!
//! The mirror feeds a delayed copy of the emitted field back to the atom, so
//! the excited-state amplitude ε(t) obeys a linear delay differential
//! equation controlled by two dimensionless parameters: the rescaled
//! round-trip time γ·t_d and the round-trip optical phase φ. The atomic
//! density matrix evolves under an amplitude-damping channel driven by ε
//! alone, which makes memory effects directly visible: whenever |ε| grows,
//! the evolution is non-divisible and the dynamics non-Markovian.
//!
//! The crate provides
//! - the channel map and parameter types ([`model`]),
//! - three routes to ε(t): an exact finite series, a method-of-steps
//!   integrator, and the memoryless small-delay limit ([`solver`]),
//! - the geometric non-Markovianity measure, its large-delay asymptotics and
//!   the bound-state trapped amplitude ([`nonmarkov`]),
//! - the environmental spectral density ([`spectrum`]),
//! - phase-diagram sweeps and threshold-curve extraction ([`sweep`]),
//! - plot-ready CSV/JSON serialization ([`output`]).

mod error;
mod numeric;

pub mod model;
pub mod nonmarkov;
pub mod output;
pub mod solver;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{canonicalize_phase, Amplitude, ModelParams, QubitState};
pub use nonmarkov::{
    asymptotic_eps4, asymptotic_measure, asymptotic_measure_with_tail, d_eps2_dt, default_horizon,
    is_markovian, nm_measure, trapped_amplitude, volume, GrowthInterval, NmResult,
};
pub use solver::{
    amplitude_mos, amplitude_series, lindblad_amplitude, AmplitudeTrajectory, SeriesEvaluator,
    DEFAULT_MESH_PER_DELAY,
};
pub use spectrum::{spectral_density, spectrum_scan, SpectralPoint};
pub use sweep::{sweep_measure, threshold_curve, SweepGrid, SweepOptions, ThresholdCurve};

/// Classification tolerance on the measure for the Markovian verdict.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;
