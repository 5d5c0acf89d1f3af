//! Discrete quantum measures, scales and detectors.
//!
//! A measure is a finite family of PSD Hermitian operators summing to the
//! identity. Detection elements carry labels `1..=K`; a measure may also
//! carry a *null element* `P_0` (label 0) that responds whenever none of the
//! labeled elements does, as produced by lossy optical networks.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix, C64};
use crate::ops::{quantum_value, real_span_rank, DensityOperator};

/// Default tolerance for measure validation.
pub const DEFAULT_TOL_MEASURE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub min_eigenvalues: Vec<f64>,
    pub hermitian_defect: f64,
    /// `||sum_k P_k - 1||_max`
    pub sum_defect: f64,
    pub zero_elements: Vec<usize>,
    pub ok: bool,
}

impl MeasureReport {
    /// Human-readable name of the first failed invariant, if any.
    pub fn failure(&self, tol: f64) -> Option<String> {
        if self.hermitian_defect > tol {
            return Some(format!("element not Hermitian (defect {:.3e})", self.hermitian_defect));
        }
        if let Some((k, l)) = self.min_eigenvalues.iter().enumerate().find(|(_, &l)| l < -tol) {
            return Some(format!("element {k} not PSD (min eigenvalue {l:.3e})"));
        }
        if self.sum_defect > tol {
            return Some(format!("elements do not sum to identity (defect {:.3e})", self.sum_defect));
        }
        if let Some(k) = self.zero_elements.first() {
            return Some(format!("element {k} is zero"));
        }
        None
    }
}

/// Validate a candidate family of measure elements.
pub fn validate_measure(elements: &[CMatrix], tol: f64) -> Result<MeasureReport> {
    let first = elements.first().ok_or_else(|| Error::contract("measure has no elements"))?;
    let d = first.nrows();
    let mut sum = linalg::zeros(d, d);
    let mut hermitian_defect: f64 = 0.0;
    let mut min_eigenvalues = Vec::with_capacity(elements.len());
    let mut zero_elements = Vec::new();
    for (k, p) in elements.iter().enumerate() {
        if !p.is_square() {
            return Err(Error::contract(format!("measure element {k} is not square")));
        }
        ensure_dim(d, p.nrows())?;
        hermitian_defect = hermitian_defect.max(linalg::hermitian_defect(p));
        min_eigenvalues.push(linalg::min_eigenvalue(p));
        if linalg::max_norm(p) <= tol {
            zero_elements.push(k);
        }
        sum += p;
    }
    let sum_defect = linalg::max_norm(&(sum - linalg::identity(d)));
    let mut report = MeasureReport { min_eigenvalues, hermitian_defect, sum_defect, zero_elements, ok: false };
    report.ok = report.failure(tol).is_none();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumMeasure {
    dim: usize,
    /// Null element first when `has_null`, then labeled elements `1..=K`.
    elements: Vec<CMatrix>,
    has_null: bool,
}

impl QuantumMeasure {
    /// Measure without a null element; labels are `1..=elements.len()`.
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        Self::build(elements, false, DEFAULT_TOL_MEASURE)
    }

    pub fn with_tolerance(elements: Vec<CMatrix>, tol: f64) -> Result<Self> {
        Self::build(elements, false, tol)
    }

    /// Measure whose labeled elements are `labeled` and whose null element
    /// is `null`. A zero null element is allowed.
    pub fn with_null(null: CMatrix, labeled: Vec<CMatrix>) -> Result<Self> {
        let mut elements = Vec::with_capacity(labeled.len() + 1);
        elements.push(null);
        elements.extend(labeled);
        Self::build(elements, true, DEFAULT_TOL_MEASURE)
    }

    fn build(elements: Vec<CMatrix>, has_null: bool, tol: f64) -> Result<Self> {
        let report = validate_measure(&elements, tol)?;
        // the null element may vanish (lossless network)
        let zero_ok = report.zero_elements.iter().all(|&k| has_null && k == 0);
        let mut check = report.clone();
        if zero_ok {
            check.zero_elements.clear();
        }
        if let Some(msg) = check.failure(tol) {
            return Err(Error::contract(format!("invalid quantum measure: {msg}")));
        }
        let dim = elements[0].nrows();
        let elements = elements.iter().map(linalg::hermitize).collect();
        Ok(QuantumMeasure { dim, elements, has_null })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All elements, null element first when present.
    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn has_null(&self) -> bool {
        self.has_null
    }

    pub fn null_element(&self) -> Option<&CMatrix> {
        self.has_null.then(|| &self.elements[0])
    }

    pub fn labeled_elements(&self) -> &[CMatrix] {
        if self.has_null {
            &self.elements[1..]
        } else {
            &self.elements
        }
    }

    /// Number of labeled (non-null) elements `K`.
    pub fn num_labeled(&self) -> usize {
        self.labeled_elements().len()
    }

    /// Event label of `elements()[index]`.
    pub fn label_of(&self, index: usize) -> usize {
        if self.has_null {
            index
        } else {
            index + 1
        }
    }

    /// Element for an event label, `None` for label 0 without null element.
    pub fn element_for_label(&self, label: usize) -> Option<&CMatrix> {
        if self.has_null {
            self.elements.get(label)
        } else if label == 0 {
            None
        } else {
            self.elements.get(label - 1)
        }
    }

    /// Computational-basis projective measure `{|i><i|}`.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut m = linalg::zeros(d, d);
                m[(i, i)] = linalg::ONE;
                m
            })
            .collect();
        QuantumMeasure { dim: d, elements, has_null: false }
    }

    /// Minimal informationally complete qubit measure `(1 + v_k . sigma)/4`
    /// over the vertices of a regular tetrahedron.
    pub fn tetrahedron() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let verts = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
        let elements = verts
            .iter()
            .map(|v| {
                let mut m = linalg::pauli(0);
                for (i, &vi) in v.iter().enumerate() {
                    m += linalg::pauli(i + 1) * c(vi, 0.0);
                }
                linalg::scale(&m, 0.25)
            })
            .collect();
        QuantumMeasure { dim: 2, elements, has_null: false }
    }

    /// Six-element qubit measure `(1 +- sigma_i)/6`, ordered
    /// `x+, x-, y+, y-, z+, z-`.
    pub fn pauli_six() -> Self {
        let mut elements = Vec::with_capacity(6);
        for i in 1..=3 {
            for sign in [1.0, -1.0] {
                let m = linalg::pauli(0) + linalg::pauli(i) * c(sign, 0.0);
                elements.push(linalg::scale(&m, 1.0 / 6.0));
            }
        }
        QuantumMeasure { dim: 2, elements, has_null: false }
    }
}

/// Response rates `p_k = tr(rho P_k)` in `elements()` order.
///
/// The rates sum to the intensity `tr rho`.
pub fn response_probabilities(m: &QuantumMeasure, rho: &DensityOperator) -> Result<Vec<f64>> {
    ensure_dim(m.dim(), rho.dim())?;
    let tol = DEFAULT_TOL_MEASURE * rho.intensity().max(1.0);
    m.elements()
        .iter()
        .map(|p| {
            let v = quantum_value(rho, p)?;
            if v.im.abs() > tol || v.re < -tol {
                return Err(Error::contract(format!("response rate {v} outside tolerance")));
            }
            Ok(v.re)
        })
        .collect()
}

/// Assignment of distinct values `a_k in C^m` to detection elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    values: Vec<Vec<C64>>,
}

impl Scale {
    pub fn new(values: Vec<Vec<C64>>) -> Result<Self> {
        let m = values.first().map_or(0, |v| v.len());
        if m == 0 {
            return Err(Error::contract("scale values must be nonempty vectors"));
        }
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::contract("scale values must share one length"));
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                if values[i] == values[j] {
                    return Err(Error::contract(format!("scale values {i} and {j} coincide")));
                }
            }
        }
        Ok(Scale { values })
    }

    pub fn real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&a| vec![c(a, 0.0)]).collect())
    }

    pub fn values(&self) -> &[Vec<C64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of components `m` of each value.
    pub fn components(&self) -> usize {
        self.values[0].len()
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().flatten().all(|z| z.im == 0.0)
    }
}

/// A measure together with a scale, one value per element of
/// `measure.elements()` (null element included when present).
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    measure: QuantumMeasure,
    scale: Scale,
}

impl Detector {
    pub fn new(measure: QuantumMeasure, scale: Scale) -> Result<Self> {
        ensure_dim(measure.elements().len(), scale.len())?;
        Ok(Detector { measure, scale })
    }

    pub fn measure(&self) -> &QuantumMeasure {
        &self.measure
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }
}

/// `A_j = sum_k (a_k)_j P_k` for each scale component `j`.
pub fn measured_quantity(det: &Detector) -> Vec<CMatrix> {
    let d = det.dim();
    (0..det.scale.components())
        .map(|j| {
            det.measure
                .elements()
                .iter()
                .zip(det.scale.values())
                .fold(linalg::zeros(d, d), |acc, (p, a)| acc + p * a[j])
        })
        .collect()
}

/// Statistical expectation `sum_k p_k f(a_k)` for a trace-one state.
pub fn statistical_expectation<F>(det: &Detector, rho: &DensityOperator, f: F) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Vec<C64>,
{
    rho.require_normalized(1e-9)?;
    let probs = response_probabilities(&det.measure, rho)?;
    let mut acc: Option<Vec<C64>> = None;
    for (p, a) in probs.iter().zip(det.scale.values()) {
        let fa = f(a);
        match acc.as_mut() {
            None => acc = Some(fa.iter().map(|z| z * *p).collect()),
            Some(v) => {
                ensure_dim(v.len(), fa.len())?;
                for (vi, z) in v.iter_mut().zip(&fa) {
                    *vi += z * *p;
                }
            }
        }
    }
    Ok(acc.unwrap_or_default())
}

/// Whether the elements are mutually orthogonal projectors, together with
/// the largest defect `||P_j P_k - delta_jk P_k||_max`.
pub fn is_projective(m: &QuantumMeasure, tol: f64) -> (bool, f64) {
    let els = m.elements();
    let mut defect: f64 = 0.0;
    for (j, pj) in els.iter().enumerate() {
        for (k, pk) in els.iter().enumerate() {
            let prod = pj * pk;
            let dev = if j == k { prod - pk } else { prod };
            defect = defect.max(linalg::max_norm(&dev));
        }
    }
    (defect <= tol, defect)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completeness {
    pub rank: usize,
    pub complete: bool,
    pub minimal: bool,
}

/// Real-linear rank of the elements in the space of Hermitian operators.
pub fn informational_completeness(m: &QuantumMeasure) -> Completeness {
    let rank = real_span_rank(m.elements());
    let d2 = m.dim() * m.dim();
    let complete = rank == d2;
    Completeness { rank, complete, minimal: complete && m.elements().len() == d2 }
}

/// Midpoint polar grid on a disc of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    pub radius: f64,
    pub radial: usize,
    pub angular: usize,
}

/// Truncated coherent state `<n|alpha>` for `n = 0..=n_max`.
pub fn coherent_state(alpha: C64, n_max: usize) -> crate::linalg::CVector {
    let mut v = crate::linalg::CVector::zeros(n_max + 1);
    let mut term = c((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = term;
    for n in 1..=n_max {
        term = term * alpha / (n as f64).sqrt();
        v[n] = term;
    }
    v
}

/// Discretized coherent-state measure `P_k = pi^-1 int e_k(alpha) |alpha><alpha|`
/// over a disc, with remainder null element `P_0 = 1 - sum P_k`.
///
/// The weight functions must be nonnegative and sum to one on the disc.
pub fn coherent_partition_measure(
    n_max: usize,
    cells: &[&dyn Fn(C64) -> f64],
    grid: PolarGrid,
) -> Result<QuantumMeasure> {
    if cells.is_empty() {
        return Err(Error::contract("at least one cell is required"));
    }
    if !(grid.radius > 0.0) || grid.radial == 0 || grid.angular == 0 {
        return Err(Error::contract("grid needs positive radius and node counts"));
    }
    let d = n_max + 1;
    let dr = grid.radius / grid.radial as f64;
    let dth = 2.0 * std::f64::consts::PI / grid.angular as f64;
    let mut elements = vec![linalg::zeros(d, d); cells.len()];
    for i in 0..grid.radial {
        let r = (i as f64 + 0.5) * dr;
        let area = r * dr * dth / std::f64::consts::PI;
        for j in 0..grid.angular {
            let th = (j as f64 + 0.5) * dth;
            let alpha = C64::from_polar(r, th);
            let weights: Vec<f64> = cells.iter().map(|e| e(alpha)).collect();
            let total: f64 = weights.iter().sum();
            if weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::contract(format!(
                    "cell weights must be nonnegative and sum to 1 (got sum {total} at {alpha})"
                )));
            }
            let ket = coherent_state(alpha, n_max);
            let proj = linalg::outer(&ket, &ket);
            for (p, &w) in elements.iter_mut().zip(&weights) {
                if w > 0.0 {
                    *p += &proj * c(w * area, 0.0);
                }
            }
        }
    }
    let sum = elements.iter().fold(linalg::zeros(d, d), |acc, p| acc + p);
    let remainder = linalg::identity(d) - sum;
    let min_eigenvalue = linalg::min_eigenvalue(&remainder);
    if min_eigenvalue < -DEFAULT_TOL_MEASURE {
        return Err(Error::TruncationInsufficient { min_eigenvalue });
    }
    QuantumMeasure::with_null(remainder, elements)
}
