use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};
use crate::measures::{QuantumMeasure, DEFAULT_TOL_MEASURE};
use crate::ops::{hermitian_basis, DensityOperator};
use crate::simulator::{label_probabilities, Rates};

use super::{fit, norm2, Reconstruction, ReconstructionReport, TomographyOptions};

/// Probe states and the label-indexed rates each produced.
#[derive(Debug, Clone)]
pub struct DetectorData {
    pub probes: Vec<DensityOperator>,
    /// `rates[l][k]`: rate of label `k` for probe `l`.
    pub rates: Vec<Vec<f64>>,
    pub stderr: Option<Vec<Vec<f64>>>,
}

impl DetectorData {
    pub fn exact(probes: Vec<DensityOperator>, m: &QuantumMeasure) -> Result<Self> {
        let rates = probes.iter().map(|p| label_probabilities(p, m)).collect::<Result<_>>()?;
        Ok(DetectorData { probes, rates, stderr: None })
    }

    pub fn from_rates(probes: Vec<DensityOperator>, rates: &[Rates]) -> Self {
        DetectorData {
            probes,
            rates: rates.iter().map(|r| r.p_hat.clone()).collect(),
            stderr: Some(rates.iter().map(|r| r.stderr.clone()).collect()),
        }
    }
}

fn clip(m: &CMatrix) -> CMatrix {
    linalg::hermitize(&linalg::eigh(m).map(|v| c(v.max(0.0), 0.0)))
}

/// Reconstruct a quantum measure from probe statistics. Each element is a
/// separate least-squares problem; the results are clipped to the PSD cone
/// and the identity deficit is shared out in proportion to element traces.
/// Label 0 becomes a null element unless its rates vanish for every probe.
pub fn detector_tomography(data: &DetectorData, opts: &TomographyOptions) -> Result<Reconstruction<QuantumMeasure>> {
    let first = data.probes.first().ok_or_else(|| Error::contract("no probe states"))?;
    let d = first.dim();
    ensure_dim(data.probes.len(), data.rates.len())?;
    let labels = data.rates[0].len();
    if labels < 2 {
        return Err(Error::contract("rates must cover label 0 and at least one element"));
    }
    for (p, r) in data.probes.iter().zip(&data.rates) {
        ensure_dim(d, p.dim())?;
        ensure_dim(labels, r.len())?;
    }
    let basis = hermitian_basis(d)?;
    let n = d * d;
    let a = RMatrix::from_fn(data.probes.len(), n, |l, m| {
        linalg::hs_inner(data.probes[l].matrix(), &basis.elements()[m]).re
    });

    let has_null = data.rates.iter().any(|r| r[0] != 0.0);
    let first_label = if has_null { 0 } else { 1 };
    let mut report = ReconstructionReport::default();
    let mut raw = Vec::new();
    for k in first_label..labels {
        let b = RVector::from_iterator(data.rates.len(), data.rates.iter().map(|r| r[k]));
        let se: Option<Vec<f64>> = data.stderr.as_ref().map(|s| s.iter().map(|r| r[k]).collect());
        let sol = fit(&a, &b, se.as_deref(), opts)?;
        if sol.rank < n {
            return Err(Error::NotInformationallyComplete { rank: sol.rank, required: n });
        }
        report.rank = sol.rank;
        report.condition_number = sol.condition_number;
        raw.push(basis.resum(&sol.x.iter().copied().collect::<Vec<_>>())?);
    }
    report.check_condition();

    let mut est: Vec<CMatrix> = raw.iter().map(clip).collect();
    let traces: Vec<f64> = est.iter().map(|p| linalg::trace(p).re).collect();
    let total: f64 = traces.iter().sum();
    if total <= 0.0 {
        return Err(Error::contract("reconstructed measure vanishes"));
    }
    let deficit = linalg::identity(d) - est.iter().fold(linalg::zeros(d, d), |acc, p| acc + p);
    for (p, t) in est.iter_mut().zip(&traces) {
        *p = clip(&(&*p + &deficit * c(t / total, 0.0)));
    }
    // re-clipping can leave a residual defect; remove it by congruence
    let sum = est.iter().fold(linalg::zeros(d, d), |acc, p| acc + p);
    if linalg::max_norm(&(&sum - linalg::identity(d))) > 1e-13 {
        let e = linalg::eigh(&sum);
        if e.min() <= 0.0 {
            return Err(Error::Numerical("reconstructed elements do not span".into()));
        }
        let s = e.map(|v| c(1.0 / v.sqrt(), 0.0));
        est = est.iter().map(|p| linalg::hermitize(&(&s * p * &s))).collect();
        report.flag("renormalized");
    }

    let misfit = |elements: &[CMatrix]| {
        norm2(data.probes.iter().zip(&data.rates).flat_map(|(rho, r)| {
            elements.iter().enumerate().map(move |(i, p)| linalg::hs_inner(rho.matrix(), p).re - r[i + first_label])
        }))
    };
    report.unconstrained_residual = misfit(&raw);
    report.residual = misfit(&est);
    report.projection_distance = raw.iter().zip(&est).map(|(r, e)| linalg::trace_norm_hermitian(&(e - r))).sum();

    if let Some(k) = est.iter().position(|p| linalg::max_norm(p) <= DEFAULT_TOL_MEASURE) {
        if !(has_null && k == 0) {
            return Err(Error::contract(format!("element for label {} reconstructs to zero", k + first_label)));
        }
    }
    let measure = if has_null {
        let null = est.remove(0);
        QuantumMeasure::with_null(null, est)?
    } else {
        QuantumMeasure::new(est)?
    };
    Ok(Reconstruction { estimate: measure, report })
}
