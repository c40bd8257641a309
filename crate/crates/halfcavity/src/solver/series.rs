//! Exact finite-series evaluation of the delayed amplitude.
//!
//! The amplitude is a sum of at most floor(t/t_d) + 1 terms; term n carries
//! the factor ((γ/2) e^{iφ + γ t_d/2})^n (t − n t_d)^n / n!, which overflows
//! quickly when evaluated factor by factor even though the term itself never
//! exceeds 1 in modulus. Every term is therefore assembled in log-magnitude +
//! phase form and the sum accumulated with compensated addition, keeping the
//! result accurate to near machine precision for any delay.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{Kahan, LnFactorial};

use super::lindblad_amplitude;

/// Refuse series evaluations needing more terms than this; the cost is
/// linear in the term count and anything beyond it signals a misuse.
const MAX_SERIES_TERMS: usize = 50_000_000;

/// Reusable evaluator for the exact amplitude series at fixed parameters.
///
/// Caches the per-term constants and the log-factorial table, so sweeping a
/// dense time grid costs a handful of flops per term.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    params: ModelParams,
    ln_rate: f64,
    phase_step: Complex64,
    ln_fact: LnFactorial,
}

impl SeriesEvaluator {
    pub fn new(params: &ModelParams) -> Self {
        let gamma = params.gamma();
        // ln(γ/2) + γ t_d / 2, the n-independent part of each term's log.
        let ln_rate = (0.5 * gamma).ln() + 0.5 * params.dimensionless_delay();
        SeriesEvaluator {
            params: *params,
            ln_rate,
            phase_step: Complex64::from_polar(1.0, params.phi()),
            ln_fact: LnFactorial::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// ε(t) as the exact truncated series. Dispatches to the closed-form
    /// memoryless amplitude when t_d = 0, where the series is ill-posed.
    pub fn eval(&mut self, t: f64) -> Result<Complex64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "time must be non-negative and finite, got {t}"
            )));
        }
        let gamma = self.params.gamma();
        let t_d = self.params.t_d();
        if t_d == 0.0 {
            return lindblad_amplitude(gamma, self.params.phi(), t);
        }

        let n_max_f = (t / t_d).floor();
        if n_max_f > MAX_SERIES_TERMS as f64 {
            return Err(Error::Overflow(format!(
                "series would need {n_max_f} terms at t = {t}, t_d = {t_d}"
            )));
        }
        let n_max = n_max_f as usize;
        let decay = -0.5 * gamma * t;

        let mut re = Kahan::new();
        let mut im = Kahan::new();
        // n = 0 term: e^{-γt/2}.
        re.add(decay.exp());

        let mut phase = Complex64::new(1.0, 0.0);
        for n in 1..=n_max {
            phase *= self.phase_step;
            let dt = t - n as f64 * t_d;
            if dt <= 0.0 {
                // Heaviside cutoff; (t - n t_d)^n vanishes at the boundary.
                continue;
            }
            let nf = n as f64;
            let log_mag = decay + nf * (self.ln_rate + dt.ln()) - self.ln_fact.get(n);
            let mag = log_mag.exp();
            if !mag.is_finite() {
                return Err(Error::Overflow(format!(
                    "series term {n} not finite at t = {t} (log magnitude {log_mag})"
                )));
            }
            re.add(mag * phase.re);
            im.add(mag * phase.im);
        }
        Ok(Complex64::new(re.value(), im.value()))
    }
}

/// One-shot evaluation of the exact amplitude series at time `t`.
pub fn amplitude_series(params: &ModelParams, t: f64) -> Result<Complex64> {
    SeriesEvaluator::new(params).eval(t)
}
