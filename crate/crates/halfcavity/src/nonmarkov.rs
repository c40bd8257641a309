//! Non-Markovianity of the delayed emission: the divisibility criterion, the
//! geometric measure, its large-delay asymptotics and the bound-state
//! trapped amplitude.
//!
//! For the amplitude-damping map the volume of accessible states is |ε|⁴, so
//! the measure is the total growth of |ε|⁴ over all intervals where it
//! increases. Growth intervals are located by scanning the sign of d|ε|²/dt
//! on the solver mesh (the derivative is exact there, no finite differences)
//! and refining each sign change by bisection on the Hermite interpolant.
//! The measure itself is the telescoping sum of endpoint values, so it
//! carries no quadrature error.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{bisect_sign_change, hermite, Kahan, LnFactorial};
use crate::solver::{segments_for_horizon, MosStepper, SegmentBuf, DEFAULT_MESH_PER_DELAY};

/// The tail bound must fall below classify_tol times this factor before a
/// measure run is declared converged.
const TRUNCATION_HEADROOM: f64 = 1e-2;

/// Horizon doublings attempted before flagging non-convergence.
const MAX_DOUBLINGS: u32 = 16;

/// Mesh-node budget per measure run (~a few seconds of integration).
const MAX_MEASURE_NODES: u64 = 1 << 28;

/// Crossing times are refined to this fraction of the delay.
const CROSSING_TOL_FRACTION: f64 = 1e-6;

/// Volume of accessible states reachable through the channel with amplitude
/// `eps`, normalized to the initial Bloch ball: |ε|⁴.
pub fn volume(eps: Complex64) -> f64 {
    let n2 = eps.norm_sqr();
    n2 * n2
}

/// Right-hand side of the divisibility condition:
/// d|ε|²/dt = -γ|ε(t)|² + γ Re[e^{iφ} ε(t - t_d) ε*(t)].
///
/// For t < t_d the feedback has not arrived yet and the delayed amplitude
/// argument is zero. The sign equals the sign of d|ε|/dt wherever ε ≠ 0.
pub fn d_eps2_dt(params: &ModelParams, eps_now: Complex64, eps_delayed: Complex64) -> f64 {
    let gamma = params.gamma();
    let phase = Complex64::from_polar(1.0, params.phi());
    gamma * ((phase * eps_delayed * eps_now.conj()).re - eps_now.norm_sqr())
}

/// Amplitude trapped in the atom-photon bound state at phase φ = 2nπ:
/// ε(t → ∞) = 1 / (1 + γ t_d / 2).
///
/// The closed form is meaningful on the bound-state condition
/// ([`ModelParams::is_bound_state_phase`]); away from it the amplitude decays
/// to zero instead and this value is only the would-be overlap.
pub fn trapped_amplitude(params: &ModelParams) -> f64 {
    1.0 / (1.0 + 0.5 * params.dimensionless_delay())
}

/// Default integration horizon for measure runs: a few dozen lifetimes and
/// at least ten delay segments. Extended automatically until the tail is
/// certified.
pub fn default_horizon(params: &ModelParams) -> f64 {
    (40.0 / params.gamma()).max(10.0 * params.t_d())
}

/// One maximal interval of growing |ε|⁴.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthInterval {
    pub start: f64,
    pub end: f64,
    /// |ε(end)|⁴ − |ε(start)|⁴ > 0.
    pub volume_gain: f64,
}

/// Result of a measure computation.
#[derive(Debug, Clone, Serialize)]
pub struct NmResult {
    pub params: ModelParams,
    /// The geometric measure: total volume gain over all growth intervals.
    pub measure: f64,
    pub intervals: Vec<GrowthInterval>,
    /// Time actually integrated to (always a multiple of t_d).
    pub horizon_used: f64,
    /// Certified estimate of the tail contribution beyond the horizon; the
    /// measure lies in [measure, measure + truncation_bound].
    pub truncation_bound: f64,
    /// True when both the measure and the tail bound sit below the
    /// classification tolerance.
    pub markovian: bool,
    /// False when the horizon budget ran out before the tail was certified.
    pub converged: bool,
    /// Total volume lost over decay intervals (non-positive).
    pub total_loss: f64,
    /// |ε(horizon)|⁴.
    pub final_volume: f64,
}

struct SegmentStats {
    env2_max: f64,
    dev_max: f64,
    v4_end: f64,
}

/// Streaming sign-scan of d|ε|²/dt with exact telescoping bookkeeping.
struct MeasureEngine<'p> {
    params: &'p ModelParams,
    t_d: f64,
    h: f64,
    k: usize,
    eps_trapped: f64,
    bound_state: bool,
    cur_sign: i8,
    cur_start: f64,
    cur_start_v4: f64,
    pending_zero: Option<(f64, f64)>,
    gains: Kahan,
    losses: Kahan,
    intervals: Vec<GrowthInterval>,
    last_t: f64,
    last_v4: f64,
    last_stats: Option<SegmentStats>,
}

impl<'p> MeasureEngine<'p> {
    fn new(params: &'p ModelParams, mesh_per_delay: usize, h: f64) -> Self {
        let t_d = params.t_d();
        let v4_td = (-2.0 * params.dimensionless_delay()).exp();
        MeasureEngine {
            params,
            t_d,
            h,
            k: mesh_per_delay,
            eps_trapped: trapped_amplitude(params),
            bound_state: params.is_bound_state_phase(),
            // The prefix [0, t_d] is pure decay.
            cur_sign: -1,
            cur_start: 0.0,
            cur_start_v4: 1.0,
            pending_zero: None,
            gains: Kahan::new(),
            losses: Kahan::new(),
            intervals: Vec::new(),
            last_t: t_d,
            last_v4: v4_td,
            last_stats: None,
        }
    }

    fn measure_so_far(&self) -> f64 {
        let open = if self.cur_sign > 0 {
            (self.last_v4 - self.cur_start_v4).max(0.0)
        } else {
            0.0
        };
        self.gains.value() + open
    }

    fn close_and_open(&mut self, t: f64, v4: f64, new_sign: i8) {
        let delta = v4 - self.cur_start_v4;
        if self.cur_sign > 0 && delta > 0.0 && t > self.cur_start {
            self.intervals.push(GrowthInterval {
                start: self.cur_start,
                end: t,
                volume_gain: delta,
            });
            self.gains.add(delta);
        } else {
            self.losses.add(delta);
        }
        self.cur_start = t;
        self.cur_start_v4 = v4;
        self.cur_sign = new_sign;
    }

    /// Inspect the derivative sign at a mesh node; a flip here means the
    /// crossing sits exactly at the node (boundary kinks and exact zeros).
    fn visit_node(&mut self, t: f64, v4: f64, g: f64) {
        if g == 0.0 {
            if self.pending_zero.is_none() {
                self.pending_zero = Some((t, v4));
            }
            return;
        }
        let s: i8 = if g > 0.0 { 1 } else { -1 };
        if s != self.cur_sign {
            let (ct, cv4) = self.pending_zero.take().unwrap_or((t, v4));
            self.close_and_open(ct, cv4, s);
        } else {
            self.pending_zero = None;
        }
    }

    fn process_segment(&mut self, m: usize, prev: &SegmentBuf, cur: &SegmentBuf) {
        let k = self.k;
        let h = self.h;
        let t_d = self.t_d;
        let t_base = m as f64 * t_d;
        let node_t = move |j: usize| {
            if j == k {
                (m + 1) as f64 * t_d
            } else {
                t_base + j as f64 * h
            }
        };
        let g_at = |j: usize| 2.0 * (cur.values[j].conj() * cur.derivs[j]).re;
        let v4_at = |j: usize| {
            let n2 = cur.values[j].norm_sqr();
            n2 * n2
        };

        let mut env2 = 0.0f64;
        let mut dev = 0.0f64;
        for v in &cur.values {
            let n2 = v.norm_sqr();
            env2 = env2.max(n2);
            if self.bound_state {
                dev = dev.max((n2.sqrt() - self.eps_trapped).abs());
            }
        }

        // The boundary node is revisited with the new segment's derivative
        // branch; at m = 1 the feedback switches on discontinuously there.
        let mut g_prev = g_at(0);
        self.visit_node(t_base, v4_at(0), g_prev);

        for j in 0..k {
            let g_next = g_at(j + 1);
            if g_prev != 0.0 && g_next != 0.0 && g_prev.signum() != g_next.signum() {
                let (ct, cv4) = self.refine_crossing(prev, cur, j, node_t(j), g_prev);
                self.close_and_open(ct, cv4, if g_next > 0.0 { 1 } else { -1 });
                self.pending_zero = None;
            } else {
                self.visit_node(node_t(j + 1), v4_at(j + 1), g_next);
            }
            g_prev = g_next;
        }

        self.last_t = node_t(k);
        self.last_v4 = v4_at(k);
        self.last_stats = Some(SegmentStats {
            env2_max: env2,
            dev_max: dev,
            v4_end: self.last_v4,
        });
    }

    /// Bisect the zero of d|ε|²/dt inside mesh interval (j, j+1), evaluating
    /// the condition on the Hermite interpolants of the stored segments.
    fn refine_crossing(
        &self,
        prev: &SegmentBuf,
        cur: &SegmentBuf,
        j: usize,
        t_left: f64,
        g_left: f64,
    ) -> (f64, f64) {
        let h = self.h;
        let now = |s: f64| {
            hermite(
                cur.values[j],
                cur.derivs[j],
                cur.values[j + 1],
                cur.derivs[j + 1],
                h,
                s,
            )
        };
        let delayed = |s: f64| {
            hermite(
                prev.values[j],
                prev.derivs[j],
                prev.values[j + 1],
                prev.derivs[j + 1],
                h,
                s,
            )
        };
        let g_fun = |s: f64| d_eps2_dt(self.params, now(s), delayed(s));
        let s_tol = (CROSSING_TOL_FRACTION * self.k as f64).min(0.25);
        let sc = bisect_sign_change(0.0, 1.0, g_left, s_tol, 64, g_fun);
        let eps_c = now(sc);
        let n2 = eps_c.norm_sqr();
        (t_left + sc * h, n2 * n2)
    }

    /// Tail-contribution estimate from the last completed segment, or
    /// infinity when nothing has been integrated yet.
    fn truncation_estimate(&self) -> f64 {
        match &self.last_stats {
            None => f64::INFINITY,
            Some(st) => {
                if self.bound_state {
                    // The deviation from the trapped amplitude obeys the same
                    // delay equation, so its future sup is bounded by the sup
                    // over the last segment; the remaining gain is at most
                    // one swing through the trapped level.
                    let delta = st.dev_max;
                    let hi = (self.eps_trapped + delta).powi(4);
                    let lo = (self.eps_trapped - delta).max(0.0).powi(4);
                    (hi - lo.min(st.v4_end)).max(0.0)
                } else {
                    // Future |ε| never exceeds its sup over the last delay
                    // segment.
                    st.env2_max * st.env2_max
                }
            }
        }
    }

    fn finalize(mut self, classify_tol: f64, converged: bool) -> NmResult {
        let truncation_bound = self.truncation_estimate();
        let end_t = self.last_t;
        let end_v4 = self.last_v4;
        self.close_and_open(end_t, end_v4, self.cur_sign);
        let measure = self.gains.value();
        NmResult {
            params: *self.params,
            measure,
            markovian: measure <= classify_tol && truncation_bound <= classify_tol,
            intervals: self.intervals,
            horizon_used: end_t,
            truncation_bound,
            converged,
            total_loss: self.losses.value(),
            final_volume: end_v4,
        }
    }
}

enum RunOutcome {
    Done(NmResult),
    EarlyNonMarkovian,
}

fn measure_impl(
    params: &ModelParams,
    horizon: f64,
    mesh_per_delay: usize,
    classify_tol: f64,
    early_exit: Option<f64>,
) -> Result<RunOutcome> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if !classify_tol.is_finite() || classify_tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "classify_tol must be positive and finite, got {classify_tol}"
        )));
    }
    if params.t_d() == 0.0 {
        // Memoryless dynamics: |ε| is non-increasing, the volume only
        // shrinks, the measure vanishes identically.
        let end_volume = volume(crate::solver::lindblad_amplitude(
            params.gamma(),
            params.phi(),
            horizon,
        )?);
        return Ok(RunOutcome::Done(NmResult {
            params: *params,
            measure: 0.0,
            intervals: Vec::new(),
            horizon_used: horizon,
            truncation_bound: 0.0,
            markovian: true,
            converged: true,
            total_loss: end_volume - 1.0,
            final_volume: end_volume,
        }));
    }

    let mut stepper = MosStepper::new(params, mesh_per_delay)?;
    let mut engine = MeasureEngine::new(params, mesh_per_delay, stepper.step());
    let env_target = classify_tol * TRUNCATION_HEADROOM;
    let mut n_target = segments_for_horizon(horizon, params.t_d());
    if (n_target as u64) * (mesh_per_delay as u64) > MAX_MEASURE_NODES {
        return Err(Error::InvalidParameter(format!(
            "requested horizon needs {n_target} delay segments at {mesh_per_delay} nodes each, \
             beyond the {MAX_MEASURE_NODES}-node budget"
        )));
    }
    let mut doublings = 0u32;

    loop {
        while stepper.segment_index() + 1 < n_target {
            stepper.advance();
            engine.process_segment(
                stepper.segment_index(),
                stepper.previous(),
                stepper.current(),
            );
            if let Some(exit_tol) = early_exit {
                if engine.measure_so_far() > exit_tol {
                    return Ok(RunOutcome::EarlyNonMarkovian);
                }
            }
        }
        if engine.truncation_estimate() <= env_target {
            return Ok(RunOutcome::Done(engine.finalize(classify_tol, true)));
        }
        let next_nodes = 2 * (n_target as u64) * (mesh_per_delay as u64);
        if doublings >= MAX_DOUBLINGS || next_nodes > MAX_MEASURE_NODES {
            return Ok(RunOutcome::Done(engine.finalize(classify_tol, false)));
        }
        n_target *= 2;
        doublings += 1;
    }
}

/// Compute the geometric non-Markovianity measure.
///
/// Integrates from `horizon` outward, doubling until the tail contribution
/// falls below `classify_tol` × 1e-2 (or, on the bound-state phase, until
/// the amplitude has stabilized at the trapped value). Runs that exhaust the
/// horizon budget return with `converged = false` rather than failing.
pub fn nm_measure(
    params: &ModelParams,
    horizon: f64,
    mesh_per_delay: usize,
    classify_tol: f64,
) -> Result<NmResult> {
    match measure_impl(params, horizon, mesh_per_delay, classify_tol, None)? {
        RunOutcome::Done(r) => Ok(r),
        RunOutcome::EarlyNonMarkovian => unreachable!("no early exit without threshold"),
    }
}

/// Divisibility verdict: true iff the measure and its tail bound both fall
/// below `classify_tol`.
///
/// Non-Markovian points return early as soon as the accumulated growth
/// exceeds the tolerance (the measure only grows with the horizon); a
/// Markovian verdict requires the converged run and non-convergence is an
/// error.
pub fn is_markovian(params: &ModelParams, horizon: f64, classify_tol: f64) -> Result<bool> {
    match measure_impl(
        params,
        horizon,
        DEFAULT_MESH_PER_DELAY,
        classify_tol,
        Some(classify_tol),
    )? {
        RunOutcome::EarlyNonMarkovian => Ok(false),
        RunOutcome::Done(r) if !r.converged => Err(Error::NotConverged(format!(
            "measure at gtd = {}, phi = {} not converged by horizon {} (tail bound {:.3e})",
            params.dimensionless_delay(),
            params.phi(),
            r.horizon_used,
            r.truncation_bound
        ))),
        RunOutcome::Done(r) => Ok(r.markovian),
    }
}

/// Partial sum of the large-delay measure series Σ_m m^{4m} e^{-4m} / (m!)⁴
/// together with a rigorous bound on the neglected tail.
///
/// Each term is below (2πm)^{-2} (Stirling), so the tail after `m_max` is
/// below 1 / (4π² m_max).
pub fn asymptotic_measure_with_tail(m_max: usize) -> (f64, f64) {
    assert!(m_max >= 1, "m_max must be at least 1");
    let mut ln_fact = LnFactorial::new();
    let mut sum = Kahan::new();
    for m in 1..=m_max {
        let mf = m as f64;
        let log_term = 4.0 * (mf * (mf.ln() - 1.0) - ln_fact.get(m));
        sum.add(log_term.exp());
    }
    let tail = 1.0 / (4.0 * std::f64::consts::PI.powi(2) * m_max as f64);
    (sum.value(), tail)
}

/// Partial sum of the large-delay measure series; see
/// [`asymptotic_measure_with_tail`].
pub fn asymptotic_measure(m_max: usize) -> f64 {
    asymptotic_measure_with_tail(m_max).0
}

/// Large-delay approximation of |ε(t)|⁴: on segment [m t_d, (m+1) t_d] only
/// the last term of the amplitude series survives,
/// [((γ/2) e^{γ t_d/2})^m / m!]⁴ e^{-2γt} (t - m t_d)^{4m},
/// with the segment maximum at t = m t_d + 2m/γ.
pub fn asymptotic_eps4(params: &ModelParams, t: f64) -> Result<f64> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "time must be non-negative and finite, got {t}"
        )));
    }
    let t_d = params.t_d();
    if t_d <= 0.0 {
        return Err(Error::InvalidParameter(
            "the piecewise large-delay form requires t_d > 0".into(),
        ));
    }
    let gamma = params.gamma();
    let m = (t / t_d).floor() as usize;
    if m == 0 {
        return Ok((-2.0 * gamma * t).exp());
    }
    let dt = t - m as f64 * t_d;
    if dt <= 0.0 {
        return Ok(0.0);
    }
    let mut ln_fact = LnFactorial::new();
    let mf = m as f64;
    let log_val = 4.0
        * (mf * ((0.5 * gamma).ln() + 0.5 * params.dimensionless_delay()) - ln_fact.get(m))
        - 2.0 * gamma * t
        + 4.0 * mf * dt.ln();
    let val = log_val.exp();
    if !val.is_finite() {
        return Err(Error::Overflow(format!(
            "large-delay form not finite at t = {t} (log value {log_val})"
        )));
    }
    Ok(val)
}
