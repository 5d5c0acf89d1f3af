//! Reconstruction of sources, detectors, filters and instruments from
//! detection statistics.
//!
//! Every engine solves the linear response equations in the least-squares
//! sense and then moves the unconstrained solution onto the physically
//! admissible set. The [`ReconstructionReport`] records how far it moved.

mod detector;
mod instrument;
mod process;
mod selfcal;
mod state;

pub use detector::{detector_tomography, DetectorData};
pub use instrument::{instrument_tomography, CoincidenceData, InstrumentEstimate, InstrumentProbe};
pub use process::process_tomography;
pub use selfcal::{self_calibrating_tomography, SelfCalEstimate, SelfCalOptions};
pub use state::{state_tomography, StateObservation};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};

/// Design matrices with a larger condition number get a warning flag.
pub const CONDITION_WARNING: f64 = 1e6;
/// Relative singular-value cutoff for rank decisions.
pub const DEFAULT_RCOND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomographyOptions {
    pub rcond: f64,
    /// Weight each equation by `1/stderr^2` when all standard errors are positive.
    pub weighted: bool,
    /// Project the result onto the admissible set (PSD cone, measures, CP maps).
    pub project: bool,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        TomographyOptions { rcond: DEFAULT_RCOND, weighted: true, project: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Euclidean norm of the design-equation misfit of the returned estimate.
    pub residual: f64,
    /// Same misfit before projection.
    pub unconstrained_residual: f64,
    pub condition_number: f64,
    pub rank: usize,
    /// Distance between the unconstrained and projected estimates: trace
    /// norm for states and measure elements, Frobenius norm of the Choi
    /// matrix for maps.
    pub projection_distance: f64,
    pub iterations: usize,
    pub flags: Vec<String>,
}

impl ReconstructionReport {
    pub(crate) fn flag(&mut self, f: &str) {
        if !self.flags.iter().any(|x| x == f) {
            self.flags.push(f.to_string());
        }
    }

    pub(crate) fn check_condition(&mut self) {
        if !(self.condition_number <= CONDITION_WARNING) {
            self.flag("ill_conditioned");
        }
    }

    pub fn has_flag(&self, f: &str) -> bool {
        self.flags.iter().any(|x| x == f)
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub estimate: T,
    pub report: ReconstructionReport,
}

pub(crate) struct LinearFit {
    pub x: RVector,
    pub rank: usize,
    pub condition_number: f64,
    pub weighted: bool,
}

/// Least squares for `a x = b`, optionally weighted by `1/stderr^2`.
/// Rank and conditioning refer to the unweighted design.
pub(crate) fn fit(a: &RMatrix, b: &RVector, stderr: Option<&[f64]>, opts: &TomographyOptions) -> Result<LinearFit> {
    let plain = linalg::lstsq_real(a, b, opts.rcond)?;
    let rank = plain.rank;
    let condition_number = linalg::condition_number(&plain.singular_values);
    let weights = stderr
        .filter(|s| opts.weighted && s.len() == b.len() && s.iter().all(|&e| e > 0.0))
        .map(|s| s.iter().map(|e| 1.0 / e).collect::<Vec<f64>>());
    match weights {
        Some(w) => {
            let mut aw = a.clone();
            let mut bw = b.clone();
            for (i, wi) in w.iter().enumerate() {
                aw.row_mut(i).scale_mut(*wi);
                bw[i] *= wi;
            }
            let sol = linalg::lstsq_real(&aw, &bw, opts.rcond)?;
            Ok(LinearFit { x: sol.x, rank, condition_number, weighted: true })
        }
        None => Ok(LinearFit { x: plain.x, rank, condition_number, weighted: false }),
    }
}

/// Clip negative eigenvalues of the Hermitian part and rescale the trace to
/// `target_trace`. Returns the projection and its trace-norm distance from
/// the input. A matrix with no positive spectrum projects to zero.
pub fn project_psd(h: &CMatrix, target_trace: f64) -> (CMatrix, f64) {
    let herm = linalg::hermitize(h);
    let eig = linalg::eigh(&herm);
    let clipped: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let s = if clipped > 0.0 { target_trace.max(0.0) / clipped } else { 0.0 };
    let out = linalg::hermitize(&eig.map(|v| c(v.max(0.0) * s, 0.0)));
    let dist = linalg::trace_norm_hermitian(&(&out - &herm));
    (out, dist)
}

pub(crate) fn norm2(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|x| x * x).sum::<f64>().sqrt()
}
