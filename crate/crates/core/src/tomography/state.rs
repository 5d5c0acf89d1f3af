use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, RMatrix, RVector};
use crate::measures::QuantumMeasure;
use crate::ops::{hermitian_basis, DensityOperator};
use crate::simulator::{label_probabilities, Rates};

use super::{fit, norm2, project_psd, Reconstruction, ReconstructionReport, TomographyOptions};

/// Rates observed with one measure, indexed by detection label `0..=K`.
#[derive(Debug, Clone)]
pub struct StateObservation {
    pub measure: QuantumMeasure,
    pub p_hat: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl StateObservation {
    pub fn new(measure: QuantumMeasure, p_hat: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        ensure_dim(measure.num_labeled() + 1, p_hat.len())?;
        if let Some(s) = &stderr {
            ensure_dim(p_hat.len(), s.len())?;
        }
        Ok(StateObservation { measure, p_hat, stderr })
    }

    pub fn from_rates(measure: QuantumMeasure, rates: &Rates) -> Result<Self> {
        Self::new(measure, rates.p_hat.clone(), Some(rates.stderr.clone()))
    }

    /// Noise-free rates of `rho`.
    pub fn exact(measure: QuantumMeasure, rho: &DensityOperator) -> Result<Self> {
        let p = label_probabilities(rho, &measure)?;
        Self::new(measure, p, None)
    }
}

/// Least-squares density operator for the response equations
/// `tr(rho P_k) = p_k` over all observations, projected to the PSD cone
/// with trace equal to the observed total rate.
pub fn state_tomography(
    observations: &[StateObservation],
    opts: &TomographyOptions,
) -> Result<Reconstruction<DensityOperator>> {
    let first = observations.first().ok_or_else(|| Error::contract("no observations"))?;
    let d = first.measure.dim();
    let basis = hermitian_basis(d)?;
    let n = d * d;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut errs = Vec::new();
    let mut have_errs = true;
    let mut report = ReconstructionReport::default();
    let mut target = 0.0;
    for obs in observations {
        ensure_dim(d, obs.measure.dim())?;
        target += obs.p_hat.iter().sum::<f64>();
        for (label, &p) in obs.p_hat.iter().enumerate() {
            match obs.measure.element_for_label(label) {
                Some(el) => {
                    rows.push(basis.elements().iter().map(|b| linalg::hs_inner(el, b).re).collect());
                    rhs.push(p);
                    match &obs.stderr {
                        Some(s) => errs.push(s[label]),
                        None => have_errs = false,
                    }
                }
                None if p != 0.0 => report.flag("unassigned_null_events"),
                None => {}
            }
        }
    }
    target /= observations.len() as f64;

    let a = RMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = RVector::from_vec(rhs);
    let sol = fit(&a, &b, have_errs.then_some(errs.as_slice()), opts)?;
    if sol.rank < n {
        return Err(Error::NotInformationallyComplete { rank: sol.rank, required: n });
    }
    report.rank = sol.rank;
    report.condition_number = sol.condition_number;
    report.check_condition();
    if have_errs && !sol.weighted && opts.weighted {
        report.flag("unweighted");
    }

    let coeffs: Vec<f64> = sol.x.iter().copied().collect();
    let raw = basis.resum(&coeffs)?;
    report.unconstrained_residual = norm2((&a * &sol.x - &b).iter().copied());
    let estimate = if opts.project {
        let (p, dist) = project_psd(&raw, target);
        report.projection_distance = dist;
        if dist > 0.0 && linalg::trace(&p).re == 0.0 && target > 0.0 {
            report.flag("projection_collapsed");
        }
        p
    } else {
        linalg::hermitize(&raw)
    };
    let x_final = RVector::from_vec(basis.expand(&estimate)?);
    report.residual = norm2((&a * x_final - &b).iter().copied());
    Ok(Reconstruction { estimate: DensityOperator::from_trusted(estimate), report })
}
