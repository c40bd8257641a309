//! Method-of-steps integration of the delay differential equation
//! ε̇(t) = -(γ/2) ε(t) + (γ/2) e^{iφ} ε(t - t_d) θ(t - t_d).
//!
//! Time is partitioned into delay segments [m t_d, (m+1) t_d]. On each
//! segment the delayed argument falls in the previous one, so the equation
//! reduces to a driven linear ODE advanced with classical RK4. On segment 0
//! the solution is the pure exponential e^{-γt/2} and is filled analytically.
//!
//! The mesh step is exactly t_d / K, so the full and half stages of every
//! RK4 step find the delayed value either on a stored node of the previous
//! segment or at a midpoint, which is interpolated with the cubic Hermite
//! built from stored node values and the exact nodal derivatives supplied by
//! the equation itself. Segment boundaries, where the solution has derivative
//! kinks, are always mesh nodes; no interpolation stencil ever straddles one.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{hermite, hermite_mid};

/// Hard cap on materialized trajectory nodes (~400 MB of samples).
const MAX_TRAJECTORY_NODES: usize = 1 << 24;

/// Minimum admissible mesh density per delay segment.
pub const MIN_MESH_PER_DELAY: usize = 16;

/// One delay segment of the solution: K+1 node values and the exact
/// derivative of the solution at each node.
#[derive(Debug, Clone)]
pub(crate) struct SegmentBuf {
    pub values: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
}

impl SegmentBuf {
    fn with_capacity(n: usize) -> Self {
        SegmentBuf {
            values: Vec::with_capacity(n),
            derivs: Vec::with_capacity(n),
        }
    }
}

/// Streaming method-of-steps integrator. Holds only the two most recent
/// segments, so arbitrarily long horizons cost constant memory.
#[derive(Debug)]
pub(crate) struct MosStepper {
    gamma_half: f64,
    feedback: Complex64,
    k: usize,
    h: f64,
    seg_index: usize,
    prev: SegmentBuf,
    cur: SegmentBuf,
    scratch: SegmentBuf,
}

impl MosStepper {
    pub fn new(params: &ModelParams, mesh_per_delay: usize) -> Result<Self> {
        let t_d = params.t_d();
        if t_d <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "method of steps requires t_d > 0, got {t_d}; use lindblad_amplitude instead"
            )));
        }
        if mesh_per_delay < MIN_MESH_PER_DELAY {
            return Err(Error::InvalidParameter(format!(
                "mesh_per_delay must be at least {MIN_MESH_PER_DELAY}, got {mesh_per_delay}"
            )));
        }
        let gamma = params.gamma();
        let k = mesh_per_delay;
        let h = t_d / k as f64;
        let gamma_half = 0.5 * gamma;

        // Segment 0 is the analytic pure-decay history.
        let mut cur = SegmentBuf::with_capacity(k + 1);
        for j in 0..=k {
            let t = if j == k { t_d } else { j as f64 * h };
            let v = Complex64::new((-gamma_half * t).exp(), 0.0);
            cur.values.push(v);
            cur.derivs.push(v * (-gamma_half));
        }

        Ok(MosStepper {
            gamma_half,
            feedback: Complex64::from_polar(gamma_half, params.phi()),
            k,
            h,
            seg_index: 0,
            prev: SegmentBuf::with_capacity(k + 1),
            cur,
            scratch: SegmentBuf::with_capacity(k + 1),
        })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    /// Index m of the segment currently held ([m t_d, (m+1) t_d]).
    pub fn segment_index(&self) -> usize {
        self.seg_index
    }

    pub fn current(&self) -> &SegmentBuf {
        &self.cur
    }

    /// Segment preceding the current one. Empty until the first `advance`.
    pub fn previous(&self) -> &SegmentBuf {
        &self.prev
    }

    /// Integrate the next delay segment and make it current.
    pub fn advance(&mut self) -> &SegmentBuf {
        let k = self.k;
        let h = self.h;
        let g2 = self.gamma_half;
        let fb = self.feedback;

        self.scratch.values.clear();
        self.scratch.derivs.clear();
        let pv = &self.cur.values;
        let pf = &self.cur.derivs;
        let nv = &mut self.scratch.values;
        let nf = &mut self.scratch.derivs;

        // Continuity at the segment boundary; the delayed value there is the
        // previous segment's first node.
        nv.push(pv[k]);
        nf.push(pv[k] * (-g2) + fb * pv[0]);

        for j in 0..k {
            let y = nv[j];
            let d1 = pv[j + 1];
            let dmid = hermite_mid(pv[j], pf[j], pv[j + 1], pf[j + 1], h);

            let k1 = nf[j];
            let k2 = (y + k1 * (0.5 * h)) * (-g2) + fb * dmid;
            let k3 = (y + k2 * (0.5 * h)) * (-g2) + fb * dmid;
            let k4 = (y + k3 * h) * (-g2) + fb * d1;

            let y1 = y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            nv.push(y1);
            nf.push(y1 * (-g2) + fb * d1);
        }

        std::mem::swap(&mut self.prev, &mut self.cur);
        std::mem::swap(&mut self.cur, &mut self.scratch);
        self.seg_index += 1;
        &self.cur
    }
}

/// Sampled amplitude trajectory on a mesh aligned with multiples of t_d.
#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub params: ModelParams,
    /// Node times, starting at 0; every multiple of t_d up to the horizon is
    /// a node, stored exactly as m * t_d.
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    pub mesh_per_delay: usize,
}

impl AmplitudeTrajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of complete delay segments covered.
    pub fn segment_count(&self) -> usize {
        (self.len() - 1) / self.mesh_per_delay
    }

    /// Last node time.
    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    /// Derivative of the solution at node `i`, reconstructed from the
    /// equation. `feedback_active` selects the branch at nodes sitting
    /// exactly on t = t_d (right limit if true).
    fn node_derivative(&self, i: usize, feedback_active: bool) -> Complex64 {
        let g2 = 0.5 * self.params.gamma();
        let mut f = self.values[i] * (-g2);
        let k = self.mesh_per_delay;
        if feedback_active && i >= k {
            let fb = Complex64::from_polar(g2, self.params.phi());
            f += fb * self.values[i - k];
        }
        f
    }

    /// Cubic Hermite evaluation of ε at an arbitrary time inside the mesh.
    pub fn value_at(&self, t: f64) -> Result<Complex64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon() {
            return Err(Error::InvalidParameter(format!(
                "time {t} outside sampled range [0, {}]",
                self.horizon()
            )));
        }
        let h = self.params.t_d() / self.mesh_per_delay as f64;
        let mut i = ((t / h) as usize).min(self.len() - 2);
        // Float division may land one node off near boundaries.
        while i > 0 && self.times[i] > t {
            i -= 1;
        }
        while i + 2 < self.len() && self.times[i + 1] < t {
            i += 1;
        }
        let dt = self.times[i + 1] - self.times[i];
        let s = ((t - self.times[i]) / dt).clamp(0.0, 1.0);
        // The interval [i, i+1] belongs to segment i / K; the feedback term
        // is active there from segment 1 on.
        let seg = i / self.mesh_per_delay;
        let active = seg >= 1;
        Ok(hermite(
            self.values[i],
            self.node_derivative(i, active),
            self.values[i + 1],
            self.node_derivative(i + 1, active),
            dt,
            s,
        ))
    }
}

/// Number of whole delay segments needed to cover `horizon`.
pub(crate) fn segments_for_horizon(horizon: f64, t_d: f64) -> usize {
    ((horizon / t_d) - 1e-9).ceil().max(1.0) as usize
}

/// Integrate the delay equation by the method of steps up to at least
/// `horizon`, sampling `mesh_per_delay` nodes per delay segment.
///
/// The mesh always extends to the next full multiple of t_d at or above the
/// horizon, so segment boundaries are exact mesh nodes.
pub fn amplitude_mos(
    params: &ModelParams,
    horizon: f64,
    mesh_per_delay: usize,
) -> Result<AmplitudeTrajectory> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let mut stepper = MosStepper::new(params, mesh_per_delay)?;
    let t_d = params.t_d();
    let k = mesh_per_delay;
    let n_seg = segments_for_horizon(horizon, t_d);
    let n_nodes = n_seg
        .checked_mul(k)
        .and_then(|n| n.checked_add(1))
        .filter(|&n| n <= MAX_TRAJECTORY_NODES)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "trajectory of {n_seg} segments x {k} nodes exceeds the storage cap"
            ))
        })?;

    let h = stepper.step();
    let mut times = Vec::with_capacity(n_nodes);
    let mut values = Vec::with_capacity(n_nodes);

    for m in 0..n_seg {
        let seg = if m == 0 {
            stepper.current()
        } else {
            stepper.advance()
        };
        let start = m as f64 * t_d;
        let first = if m == 0 { 0 } else { 1 };
        for j in first..=k {
            let t = if j == k {
                (m + 1) as f64 * t_d
            } else {
                start + j as f64 * h
            };
            times.push(t);
            values.push(seg.values[j]);
        }
    }

    Ok(AmplitudeTrajectory {
        params: *params,
        times,
        values,
        mesh_per_delay,
    })
}
