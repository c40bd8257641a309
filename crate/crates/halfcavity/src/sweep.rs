//! Phase-diagram sweeps over (φ, γt_d) and extraction of the
//! Markovian/non-Markovian threshold curve.
//!
//! Every grid cell is an independent pure computation, so cells are farmed
//! out to a thread pool; the aggregation is positional and the output is
//! identical for any worker count.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nonmarkov::{default_horizon, is_markovian, nm_measure};
use crate::solver::DEFAULT_MESH_PER_DELAY;

/// Options shared by the sweep and threshold computations.
#[derive(Debug, Clone, Serialize)]
pub struct SweepOptions {
    pub mesh_per_delay: usize,
    pub classify_tol: f64,
    /// Initial integration horizon; defaults per point to
    /// [`default_horizon`] when absent. Units of time (1/γ in rescaled use).
    pub horizon: Option<f64>,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            mesh_per_delay: DEFAULT_MESH_PER_DELAY,
            classify_tol: crate::DEFAULT_CLASSIFY_TOL,
            horizon: None,
            workers: 0,
        }
    }
}

/// Per-cell convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellDiagnostics {
    pub horizon_used: f64,
    pub truncation_bound: f64,
    pub converged: bool,
}

/// Measure values over the (φ, γt_d) grid; rows follow `gtd_values`,
/// columns follow `phi_values`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    pub phi_values: Vec<f64>,
    pub gtd_values: Vec<f64>,
    pub measures: Vec<Vec<f64>>,
    pub diagnostics: Vec<Vec<CellDiagnostics>>,
}

impl SweepGrid {
    pub fn all_converged(&self) -> bool {
        self.diagnostics.iter().flatten().all(|d| d.converged)
    }

    /// Largest cell value with its (row, column) position.
    pub fn max_cell(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, row) in self.measures.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Column indices whose Markovian verdict flips more than once while
    /// scanning γt_d upward. A non-empty result voids the single-threshold
    /// reading of the phase diagram for those phases.
    pub fn multi_flip_columns(&self, classify_tol: f64) -> Vec<usize> {
        let mut out = Vec::new();
        for j in 0..self.phi_values.len() {
            let mut flips = 0;
            let mut prev = self.measures[0][j] > classify_tol;
            for row in &self.measures[1..] {
                let cur = row[j] > classify_tol;
                if cur != prev {
                    flips += 1;
                    prev = cur;
                }
            }
            if flips > 1 {
                out.push(j);
            }
        }
        out
    }
}

/// Threshold curve: per-φ critical γt_d separating the Markovian region
/// below from the non-Markovian region above.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCurve {
    pub phi_values: Vec<f64>,
    /// Critical γt_d per phase; `None` marks an explicit failure (still
    /// Markovian at the bracket top, or verdict not converged).
    pub critical_gtd: Vec<Option<f64>>,
    pub bisection_tol: f64,
}

impl ThresholdCurve {
    pub fn all_resolved(&self) -> bool {
        self.critical_gtd.iter().all(|c| c.is_some())
    }
}

fn validate_phi_axis(phi_axis: &[f64]) -> Result<()> {
    if phi_axis.is_empty() {
        return Err(Error::InvalidParameter("phi axis is empty".into()));
    }
    for w in phi_axis.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter("phi axis must be sorted".into()));
        }
    }
    for &phi in phi_axis {
        if !phi.is_finite() || !(0.0..=TAU).contains(&phi) {
            return Err(Error::InvalidParameter(format!(
                "phi axis values must lie in [0, 2pi], got {phi}"
            )));
        }
    }
    Ok(())
}

fn run_pooled<T, F>(workers: usize, job: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        Ok(job())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(pool.install(job))
    }
}

/// Compute the measure on every (γt_d, φ) grid cell.
///
/// Cells are independent; any cell that exhausts its horizon budget is
/// reported through its diagnostics entry rather than silently zeroed.
pub fn sweep_measure(
    phi_axis: &[f64],
    gtd_axis: &[f64],
    options: &SweepOptions,
) -> Result<SweepGrid> {
    validate_phi_axis(phi_axis)?;
    if gtd_axis.is_empty() {
        return Err(Error::InvalidParameter("gtd axis is empty".into()));
    }
    for w in gtd_axis.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidParameter("gtd axis must be sorted".into()));
        }
    }
    for &g in gtd_axis {
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gtd axis values must be positive, got {g}"
            )));
        }
    }

    let cells: Vec<(usize, usize)> = (0..gtd_axis.len())
        .flat_map(|i| (0..phi_axis.len()).map(move |j| (i, j)))
        .collect();
    let opts = options.clone();

    let results: Vec<Result<(f64, CellDiagnostics)>> = run_pooled(options.workers, move || {
        cells
            .par_iter()
            .map(|&(i, j)| {
                let params = ModelParams::dimensionless(gtd_axis[i], phi_axis[j])?;
                let horizon = opts.horizon.unwrap_or_else(|| default_horizon(&params));
                let r = nm_measure(&params, horizon, opts.mesh_per_delay, opts.classify_tol)?;
                Ok((
                    r.measure,
                    CellDiagnostics {
                        horizon_used: r.horizon_used,
                        truncation_bound: r.truncation_bound,
                        converged: r.converged,
                    },
                ))
            })
            .collect()
    })?;

    let n_phi = phi_axis.len();
    let mut measures = Vec::with_capacity(gtd_axis.len());
    let mut diagnostics = Vec::with_capacity(gtd_axis.len());
    let mut it = results.into_iter();
    for _ in 0..gtd_axis.len() {
        let mut mrow = Vec::with_capacity(n_phi);
        let mut drow = Vec::with_capacity(n_phi);
        for _ in 0..n_phi {
            let (m, d) = it.next().expect("cell count mismatch")?;
            mrow.push(m);
            drow.push(d);
        }
        measures.push(mrow);
        diagnostics.push(drow);
    }

    Ok(SweepGrid {
        phi_values: phi_axis.to_vec(),
        gtd_values: gtd_axis.to_vec(),
        measures,
        diagnostics,
    })
}

fn threshold_for_phi(
    phi: f64,
    gtd_max: f64,
    bisection_tol: f64,
    classify_tol: f64,
    options: &SweepOptions,
) -> Result<Option<f64>> {
    let verdict = |gtd: f64| -> Result<bool> {
        let params = ModelParams::dimensionless(gtd, phi)?;
        let horizon = options.horizon.unwrap_or_else(|| default_horizon(&params));
        is_markovian(&params, horizon, classify_tol)
    };
    // Bracket check: the dynamics must already be non-Markovian at the top.
    match verdict(gtd_max) {
        Ok(false) => {}
        Ok(true) => return Ok(None),
        Err(Error::NotConverged(_)) => return Ok(None),
        Err(e) => return Err(e),
    }
    // γt_d = 0 is the memoryless limit, Markovian by construction.
    let mut lo = 0.0f64;
    let mut hi = gtd_max;
    while hi - lo > bisection_tol {
        let mid = 0.5 * (lo + hi);
        match verdict(mid) {
            Ok(true) => lo = mid,
            Ok(false) => hi = mid,
            Err(Error::NotConverged(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Extract the threshold curve by per-φ bisection on the Markovian verdict.
///
/// Assumes the verdict flips once along γt_d for fixed φ; cross-validate
/// against a full grid via [`SweepGrid::multi_flip_columns`]. Phases still
/// Markovian at `gtd_max` get an explicit `None` entry. Verdicts run at the
/// default mesh density; `options.mesh_per_delay` only affects grid sweeps.
pub fn threshold_curve(
    phi_axis: &[f64],
    gtd_max: f64,
    bisection_tol: f64,
    classify_tol: f64,
    options: &SweepOptions,
) -> Result<ThresholdCurve> {
    validate_phi_axis(phi_axis)?;
    if !gtd_max.is_finite() || gtd_max <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gtd_max must be positive, got {gtd_max}"
        )));
    }
    if !bisection_tol.is_finite() || bisection_tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bisection_tol must be positive, got {bisection_tol}"
        )));
    }

    let opts = options.clone();
    let phis = phi_axis.to_vec();
    let critical: Vec<Result<Option<f64>>> = run_pooled(options.workers, move || {
        phis.par_iter()
            .map(|&phi| threshold_for_phi(phi, gtd_max, bisection_tol, classify_tol, &opts))
            .collect()
    })?;

    let critical_gtd = critical.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ThresholdCurve {
        phi_values: phi_axis.to_vec(),
        critical_gtd,
        bisection_tol,
    })
}
