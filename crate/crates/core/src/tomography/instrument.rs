use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::measures::QuantumMeasure;
use crate::ops::DensityOperator;
use crate::simulator::{empirical_coincidence_rates, CoincidenceLog, CoincidenceRates, Instrument};
use crate::superop::SuperOperator;

use super::{
    process_tomography, state_tomography, Reconstruction, ReconstructionReport, StateObservation, TomographyOptions,
};

/// Joint statistics `p(j, k)` of one probe.
#[derive(Debug, Clone)]
pub enum CoincidenceData {
    Exact(Vec<Vec<f64>>),
    Sampled(CoincidenceRates),
}

impl CoincidenceData {
    pub fn from_log(log: &CoincidenceLog) -> Result<Self> {
        empirical_coincidence_rates(log).map(CoincidenceData::Sampled)
    }

    pub fn exact(instrument: &Instrument, rho: &DensityOperator, detector: &QuantumMeasure) -> Result<Self> {
        instrument.coincidence_probabilities(rho, detector).map(CoincidenceData::Exact)
    }

    fn shape(&self) -> (usize, usize) {
        match self {
            CoincidenceData::Exact(t) => (t.len(), t.first().map_or(0, Vec::len)),
            CoincidenceData::Sampled(r) => (r.joint.p_hat.len() / r.num_outcomes, r.num_outcomes),
        }
    }

    /// Row `j` of the joint table with its standard errors.
    fn row(&self, j: usize) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            CoincidenceData::Exact(t) => (t[j].clone(), None),
            CoincidenceData::Sampled(r) => {
                let k = r.num_outcomes;
                (r.joint.p_hat[j * k..(j + 1) * k].to_vec(), Some(r.joint.stderr[j * k..(j + 1) * k].to_vec()))
            }
        }
    }

    fn has_events(&self, j: usize) -> bool {
        self.row(j).0.iter().any(|&p| p > 0.0)
    }

    /// Observed branch rates and their standard errors (zero for exact data).
    pub fn branch_marginal(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            CoincidenceData::Exact(t) => (t.iter().map(|r| r.iter().sum()).collect(), vec![0.0; t.len()]),
            CoincidenceData::Sampled(r) => (r.branch_marginal.p_hat.clone(), r.branch_marginal.stderr.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstrumentProbe {
    pub state: DensityOperator,
    pub data: CoincidenceData,
}

#[derive(Debug, Clone)]
pub struct InstrumentEstimate {
    /// Branch maps indexed by instrument label; index 0 is the null branch.
    pub branches: Vec<SuperOperator>,
    /// `observed_rates[l][j]`: branch rate seen for probe `l`.
    pub observed_rates: Vec<Vec<f64>>,
    pub observed_stderr: Vec<Vec<f64>>,
    /// `tr E_j(rho_l)` for the recovered maps.
    pub predicted_rates: Vec<Vec<f64>>,
}

/// Recover the branch maps of an instrument. For every probe the
/// coincidences with fixed branch `j` are the statistics of the
/// unnormalized output `E_j(rho_l)` under the second detector; state
/// tomography recovers those outputs and process tomography the maps.
pub fn instrument_tomography(
    probes: &[InstrumentProbe],
    detector: &QuantumMeasure,
    opts: &TomographyOptions,
) -> Result<Reconstruction<InstrumentEstimate>> {
    let first = probes.first().ok_or_else(|| Error::contract("no probe states"))?;
    let (branches, outcomes) = first.data.shape();
    ensure_dim(detector.num_labeled() + 1, outcomes)?;
    if branches < 2 {
        return Err(Error::contract("coincidence table needs label 0 and at least one branch"));
    }
    for p in probes {
        ensure_dim(detector.dim(), p.state.dim())?;
        let (b, o) = p.data.shape();
        ensure_dim(branches, b)?;
        ensure_dim(outcomes, o)?;
    }
    for j in 1..branches {
        if !probes.iter().any(|p| p.data.has_events(j)) {
            return Err(Error::InsufficientEvents { branch: j });
        }
    }

    let d = detector.dim();
    let inputs: Vec<CMatrix> = probes.iter().map(|p| p.state.matrix().clone()).collect();
    let mut report = ReconstructionReport::default();
    let mut maps = Vec::with_capacity(branches);
    let mut sq_residual = 0.0;
    for j in 0..branches {
        if j == 0 && !probes.iter().any(|p| p.data.has_events(0)) {
            maps.push(SuperOperator::zero(d));
            continue;
        }
        let mut outputs = Vec::with_capacity(probes.len());
        for p in probes {
            let (row, stderr) = p.data.row(j);
            let obs = StateObservation::new(detector.clone(), row, stderr)?;
            let rec = state_tomography(&[obs], opts)?;
            sq_residual += rec.report.residual.powi(2);
            report.projection_distance += rec.report.projection_distance;
            for f in &rec.report.flags {
                report.flag(f);
            }
            outputs.push(rec.estimate.into_matrix());
        }
        let rec = process_tomography(&inputs, &outputs, opts)?;
        sq_residual += rec.report.residual.powi(2);
        report.unconstrained_residual = report.unconstrained_residual.hypot(rec.report.unconstrained_residual);
        report.projection_distance += rec.report.projection_distance;
        report.rank = rec.report.rank;
        report.condition_number = report.condition_number.max(rec.report.condition_number);
        for f in &rec.report.flags {
            report.flag(f);
        }
        maps.push(rec.estimate);
    }
    report.residual = sq_residual.sqrt();

    let (observed_rates, observed_stderr) = probes.iter().map(|p| p.data.branch_marginal()).unzip();
    let predicted_rates = probes
        .iter()
        .map(|p| maps.iter().map(|m| Ok(linalg::trace(&m.apply(p.state.matrix())?).re)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    Ok(Reconstruction {
        estimate: InstrumentEstimate { branches: maps, observed_rates, observed_stderr, predicted_rates },
        report,
    })
}
