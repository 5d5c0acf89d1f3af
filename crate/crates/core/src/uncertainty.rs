//! Quantum uncertainty of operator vectors and its relation to the spread
//! of measurement results.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::measures::{measured_quantity, response_probabilities, Detector};
use crate::ops::{quantum_value, DensityOperator, StateVector};

/// Trace tolerance for the trace-one requirement.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Slack allowed in the inequalities before they count as violated.
pub const INEQUALITY_SLACK: f64 = 1e-10;

/// Vector `X = (X_1, .., X_m)` of operators on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityVector {
    components: Vec<CMatrix>,
}

impl QuantityVector {
    pub fn new(components: Vec<CMatrix>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::contract("quantity has no components"))?;
        let d = first.nrows();
        for x in &components {
            if !x.is_square() {
                return Err(Error::contract("quantity component is not square"));
            }
            ensure_dim(d, x.nrows())?;
        }
        Ok(QuantityVector { components })
    }

    pub fn scalar(x: CMatrix) -> Result<Self> {
        Self::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.components[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn components(&self) -> &[CMatrix] {
        &self.components
    }

    /// `|X - xi|^2 = sum_j (X_j - xi_j)* (X_j - xi_j)`.
    pub fn squared_deviation(&self, xi: &[C64]) -> Result<CMatrix> {
        ensure_dim(self.len(), xi.len())?;
        let d = self.dim();
        Ok(self.components.iter().zip(xi).fold(linalg::zeros(d, d), |acc, (x, &z)| {
            let y = x - linalg::identity(d) * z;
            acc + y.adjoint() * y
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub mean: Vec<C64>,
    /// `sigma^2 = <X* X> - |<X>|^2`, clipped at zero.
    pub variance: f64,
    pub sigma: f64,
    /// `C_jk = <(X_j - <X_j>)(X_k - <X_k>)*>`.
    pub covariance: Vec<Vec<C64>>,
}

fn require_state(rho: &DensityOperator, d: usize) -> Result<()> {
    ensure_dim(d, rho.dim())?;
    rho.require_normalized(NORMALIZATION_TOL)
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Quantum uncertainty and covariance in a trace-one state.
pub fn q_uncertainty(rho: &DensityOperator, x: &QuantityVector) -> Result<UncertaintyReport> {
    require_state(rho, x.dim())?;
    let d = x.dim();
    let mean: Vec<C64> = x.components().iter().map(|xj| quantum_value(rho, xj)).collect::<Result<_>>()?;
    let centered: Vec<CMatrix> =
        x.components().iter().zip(&mean).map(|(xj, &m)| xj - linalg::identity(d) * m).collect();
    let mut second = 0.0;
    for y in &centered {
        second += quantum_value(rho, &(y.adjoint() * y))?.re;
    }
    let variance = second.max(0.0);
    let covariance = centered
        .iter()
        .map(|yj| centered.iter().map(|yk| quantum_value(rho, &(yj * yk.adjoint()))).collect())
        .collect::<Result<_>>()?;
    Ok(UncertaintyReport { mean, variance, sigma: variance.sqrt(), covariance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobertsonCheck {
    /// `sigma_A sigma_B`.
    pub lhs: f64,
    /// `|<[A, B]>| / 2`.
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
}

pub fn robertson_check(rho: &DensityOperator, a: &CMatrix, b: &CMatrix) -> Result<RobertsonCheck> {
    for (m, name) in [(a, "A"), (b, "B")] {
        if !m.is_square() || linalg::hermitian_defect(m) > 1e-10 * linalg::max_norm(m).max(1.0) {
            return Err(Error::contract(format!("{name} is not Hermitian")));
        }
    }
    ensure_dim(a.nrows(), b.nrows())?;
    let sa = q_uncertainty(rho, &QuantityVector::scalar(a.clone())?)?.sigma;
    let sb = q_uncertainty(rho, &QuantityVector::scalar(b.clone())?)?.sigma;
    let lhs = sa * sb;
    let rhs = 0.5 * quantum_value(rho, &linalg::commutator(a, b))?.norm();
    let slack = lhs - rhs;
    Ok(RobertsonCheck { lhs, rhs, slack, satisfied: slack >= -INEQUALITY_SLACK })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticalSpread {
    /// `E(|a_k - <A>|^2)`.
    pub e_var: f64,
    /// `sigma_A^2` of the measured quantity.
    pub sigma2: f64,
    pub excess: f64,
}

fn outcome_stats(det: &Detector, rho: &DensityOperator) -> Result<(Vec<f64>, Vec<C64>)> {
    let p = response_probabilities(det.measure(), rho)?;
    let m = det.scale().components();
    let mut mean = vec![linalg::ZERO; m];
    for (pk, ak) in p.iter().zip(det.scale().values()) {
        for (s, a) in mean.iter_mut().zip(ak) {
            *s += a * *pk;
        }
    }
    Ok((p, mean))
}

/// Expected squared distance of the results from `xi`.
fn expected_sq(det: &Detector, p: &[f64], xi: &[C64]) -> f64 {
    p.iter().zip(det.scale().values()).map(|(pk, ak)| pk * norm_sqr(&diff(ak, xi))).sum()
}

pub fn statistical_vs_quantum(det: &Detector, rho: &DensityOperator) -> Result<StatisticalSpread> {
    require_state(rho, det.dim())?;
    let (p, a_bar) = outcome_stats(det, rho)?;
    let e_var = expected_sq(det, &p, &a_bar);
    let a = QuantityVector::new(measured_quantity(det))?;
    let sigma2 = q_uncertainty(rho, &a)?.variance;
    Ok(StatisticalSpread { e_var, sigma2, excess: e_var - sigma2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementUncertainty {
    /// `E(|a_k - <X>|^2)`.
    pub mse: f64,
    /// `sqrt(mse)`.
    pub rmse: f64,
    /// `|<A> - <X>|`.
    pub bias: f64,
    /// `E(|a_k - <A>|^2)`.
    pub e_var: f64,
    pub sigma_x2: f64,
    pub sigma_a2: f64,
    /// `sqrt(mse + (sigma_X^2 - sigma_A^2)_+)`.
    pub delta: f64,
}

pub fn measurement_uncertainty(
    det: &Detector,
    rho: &DensityOperator,
    x: &QuantityVector,
) -> Result<MeasurementUncertainty> {
    require_state(rho, det.dim())?;
    ensure_dim(det.scale().components(), x.len())?;
    ensure_dim(det.dim(), x.dim())?;
    let (p, a_bar) = outcome_stats(det, rho)?;
    let xr = q_uncertainty(rho, x)?;
    let sigma_a2 = q_uncertainty(rho, &QuantityVector::new(measured_quantity(det))?)?.variance;
    let mse = expected_sq(det, &p, &xr.mean);
    let delta = (mse + (xr.variance - sigma_a2).max(0.0)).sqrt();
    Ok(MeasurementUncertainty {
        mse,
        rmse: mse.sqrt(),
        bias: norm_sqr(&diff(&a_bar, &xr.mean)).sqrt(),
        e_var: expected_sq(det, &p, &a_bar),
        sigma_x2: xr.variance,
        sigma_a2,
        delta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMembership {
    /// Smallest eigenvalue of `|X - xi|^2`: the infimum of `<|X - xi|^2>`
    /// over trace-one states.
    pub min_eig: f64,
    pub member: bool,
    pub witness: Option<StateVector>,
}

pub fn spectrum_membership(x: &QuantityVector, xi: &[C64], tol: f64) -> Result<SpectrumMembership> {
    let b = x.squared_deviation(xi)?;
    let eig = linalg::eigh(&b);
    let min_eig = eig.min();
    let member = min_eig <= tol;
    let witness = if member {
        let mut v = eig.vector(0);
        linalg::canonical_phase(&mut v, 1e-12);
        Some(StateVector::new(v)?)
    } else {
        None
    };
    Ok(SpectrumMembership { min_eig, member, witness })
}

/// Truncated ladder pair `q = (a + a*)/sqrt 2`, `p = (a - a*)/(i sqrt 2)`.
pub fn canonical_pair(d: usize) -> Result<QuantityVector> {
    let mut a = linalg::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (&a + a.adjoint()) * c(s, 0.0);
    let p = (&a - a.adjoint()) * c(0.0, -s);
    QuantityVector::new(vec![q, p])
}
