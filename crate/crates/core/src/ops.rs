//! Density operators, state vectors, Hermitian operator bases and
//! quantum values `<X> = tr(rho X)`.
//!
//! Densities carry intensity: `tr(rho)` is the source intensity and need not
//! be one. The dark state is `rho = 0`. Use [`DensityOperator::normalized`]
//! when probabilities rather than rates are wanted.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, eigh, CMatrix, CVector, RMatrix, C64, I, ONE};

/// Absolute tolerance on `||rho - rho*||_max`.
pub const DEFAULT_TOL_HERM: f64 = 1e-10;
/// PSD tolerance, relative to `max(tr rho, 1)`.
pub const DEFAULT_TOL_PSD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm: DEFAULT_TOL_HERM, psd: DEFAULT_TOL_PSD }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub hermitian_defect: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub ok: bool,
}

/// Check hermiticity and positivity of a candidate density matrix.
///
/// `ok` holds iff the Hermitian defect is at most `tol` and the smallest
/// eigenvalue (of the symmetrized matrix) is at least `-tol * max(tr, 1)`.
pub fn validate_density(m: &CMatrix, tol: f64) -> Result<DensityReport> {
    validate_density_with(m, Tolerances { herm: tol, psd: tol })
}

pub fn validate_density_with(m: &CMatrix, tol: Tolerances) -> Result<DensityReport> {
    if !m.is_square() {
        return Err(Error::contract(format!("density matrix must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    if !linalg::is_finite(m) {
        return Err(Error::contract("density matrix has non-finite entries"));
    }
    let hermitian_defect = linalg::hermitian_defect(m);
    let min_eigenvalue = eigh(m).min();
    let trace = linalg::trace(m).re;
    let ok = hermitian_defect <= tol.herm && min_eigenvalue >= -tol.psd * trace.max(1.0);
    Ok(DensityReport { hermitian_defect, min_eigenvalue, trace, ok })
}

/// Positive semidefinite Hermitian operator describing a source.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validate with default tolerances; the stored matrix is symmetrized.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMatrix, tol: Tolerances) -> Result<Self> {
        let report = validate_density_with(&matrix, tol)?;
        if !report.ok {
            return Err(Error::contract(format!(
                "invalid density: hermitian defect {:.3e}, min eigenvalue {:.3e}, trace {:.6}",
                report.hermitian_defect, report.min_eigenvalue, report.trace
            )));
        }
        Ok(DensityOperator { matrix: linalg::hermitize(&matrix) })
    }

    /// Wrap a matrix that is known to be a valid density by construction.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityOperator { matrix: linalg::hermitize(&matrix) }
    }

    pub fn dark(d: usize) -> Self {
        DensityOperator { matrix: linalg::zeros(d, d) }
    }

    /// `identity / d`.
    pub fn maximally_mixed(d: usize) -> Self {
        DensityOperator { matrix: linalg::identity(d) * c(1.0 / d as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Source intensity `tr rho`.
    pub fn intensity(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// Divide by the trace. Fails on the dark state.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.intensity();
        if t <= 0.0 {
            return Err(Error::DarkState);
        }
        Ok(DensityOperator { matrix: linalg::scale(&self.matrix, 1.0 / t) })
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::contract(format!("intensity scale must be nonnegative, got {s}")));
        }
        Ok(DensityOperator { matrix: linalg::scale(&self.matrix, s) })
    }

    /// Superposition of two sources.
    pub fn combine(&self, other: &DensityOperator) -> Result<Self> {
        ensure_dim(self.dim(), other.dim())?;
        Ok(DensityOperator { matrix: &self.matrix + &other.matrix })
    }

    pub(crate) fn require_normalized(&self, tol: f64) -> Result<()> {
        let t = self.intensity();
        if (t - 1.0).abs() > tol {
            return Err(Error::contract(format!("state must have trace 1, got trace {t:.12}")));
        }
        Ok(())
    }
}

/// Intensity-carrying state vector; `psi* psi` is the intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    components: CVector,
}

impl StateVector {
    pub fn new(components: CVector) -> Result<Self> {
        if components.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::contract("state vector has non-finite components"));
        }
        if components.is_empty() {
            return Err(Error::contract("state vector must have positive dimension"));
        }
        Ok(StateVector { components })
    }

    pub fn from_slice(components: &[C64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(components))
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &CVector {
        &self.components
    }

    pub fn intensity(&self) -> f64 {
        self.components.norm_squared()
    }
}

/// `rho = psi psi*`.
pub fn density_from_state(psi: &StateVector) -> DensityOperator {
    DensityOperator::from_trusted(linalg::outer(psi.components(), psi.components()))
}

/// Quantum value `tr(rho X)`.
pub fn quantum_value(rho: &DensityOperator, x: &CMatrix) -> Result<C64> {
    if !x.is_square() {
        return Err(Error::contract("quantity must be a square matrix"));
    }
    ensure_dim(rho.dim(), x.nrows())?;
    // tr(rho X) = sum_{ij} rho_ij X_ji
    let m = rho.matrix();
    let d = rho.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += m[(i, j)] * x[(j, i)];
        }
    }
    Ok(acc)
}

/// Real basis of the `d^2`-dimensional space of Hermitian `d x d` matrices.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Real Gram matrix `Re tr(B_i B_j)`.
    pub fn gram(&self) -> RMatrix {
        gram_matrix(&self.elements)
    }

    /// Real coefficients of a Hermitian matrix in this basis.
    pub fn expand(&self, h: &CMatrix) -> Result<Vec<f64>> {
        ensure_dim(self.dim, h.nrows())?;
        let g = self.gram();
        let rhs = nalgebra::DVector::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|b| linalg::hs_inner(b, h).re),
        );
        let sol = linalg::lstsq_real(&g, &rhs, 1e-13)?;
        Ok(sol.x.iter().copied().collect())
    }

    pub fn resum(&self, coeffs: &[f64]) -> Result<CMatrix> {
        ensure_dim(self.elements.len(), coeffs.len())?;
        let mut out = linalg::zeros(self.dim, self.dim);
        for (b, &a) in self.elements.iter().zip(coeffs) {
            out += b * c(a, 0.0);
        }
        Ok(out)
    }
}

/// Hermitian basis with identity first, then the symmetric off-diagonal
/// pairs, the antisymmetric pairs and finally `d-1` traceless diagonals.
/// For `d = 2` this is `(sigma_0, sigma_1, sigma_2, sigma_3)`.
pub fn hermitian_basis(d: usize) -> Result<OperatorBasis> {
    if d == 0 {
        return Err(Error::contract("basis dimension must be positive"));
    }
    let mut elements = Vec::with_capacity(d * d);
    elements.push(linalg::identity(d));
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|j| (j + 1..d).map(move |k| (j, k))).collect();
    for &(j, k) in &pairs {
        let mut m = linalg::zeros(d, d);
        m[(j, k)] = ONE;
        m[(k, j)] = ONE;
        elements.push(m);
    }
    for &(j, k) in &pairs {
        let mut m = linalg::zeros(d, d);
        m[(j, k)] = -I;
        m[(k, j)] = I;
        elements.push(m);
    }
    for l in 1..d {
        let mut m = linalg::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = ONE;
        }
        m[(l, l)] = c(-(l as f64), 0.0);
        elements.push(m);
    }
    Ok(OperatorBasis { dim: d, elements })
}

/// Real Gram matrix of Hilbert-Schmidt products for Hermitian matrices.
pub fn gram_matrix(elements: &[CMatrix]) -> RMatrix {
    let n = elements.len();
    RMatrix::from_fn(n, n, |i, j| linalg::hs_inner(&elements[i], &elements[j]).re)
}

/// Real-linear rank of a family of Hermitian matrices.
pub fn real_span_rank(elements: &[CMatrix]) -> usize {
    if elements.is_empty() {
        return 0;
    }
    let g = gram_matrix(elements);
    let sv: Vec<f64> = g.svd(false, false).singular_values.iter().copied().collect();
    linalg::numerical_rank(&sv, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_norm, pauli};
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_identity() -> DensityOperator {
        DensityOperator::maximally_mixed(2)
    }

    #[test]
    fn quantum_value_examples() {
        assert!(quantum_value(&half_identity(), &pauli(3)).unwrap().norm() < 1e-15);
        let up = DensityOperator::new(diag(&[1.0, 0.0])).unwrap();
        assert!((quantum_value(&up, &pauli(3)).unwrap() - ONE).norm() < 1e-15);
        let rho = (pauli(0) + pauli(1) * c(0.6, 0.0) + pauli(3) * c(0.8, 0.0)) * c(0.5, 0.0);
        let rho = DensityOperator::new(rho).unwrap();
        assert!((quantum_value(&rho, &pauli(1)).unwrap().re - 0.6).abs() < 1e-15);
    }

    #[test]
    fn quantum_value_dimension_mismatch() {
        let err = quantum_value(&half_identity(), &linalg::identity(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn basis_small_dimensions() {
        let b1 = hermitian_basis(1).unwrap();
        assert_eq!(b1.elements(), &[linalg::identity(1)]);
        let b2 = hermitian_basis(2).unwrap();
        for k in 0..4 {
            assert_eq!(b2.elements()[k], pauli(k));
        }
        assert!(hermitian_basis(0).is_err());
    }

    #[test]
    fn basis_d3_has_full_gram_rank() {
        let b = hermitian_basis(3).unwrap();
        assert_eq!(b.elements().len(), 9);
        assert_eq!(real_span_rank(b.elements()), 9);
        assert!(b.elements().iter().all(|e| linalg::hermitian_defect(e) == 0.0));
    }

    #[test]
    fn validate_density_examples() {
        let dark = validate_density(&linalg::zeros(2, 2), 1e-10).unwrap();
        assert!(dark.ok);
        assert_eq!(dark.trace, 0.0);
        let mixed = validate_density(&diag(&[0.5, 0.5]), 1e-10).unwrap();
        assert!(mixed.ok);
        assert!((mixed.trace - 1.0).abs() < 1e-15);
        let bad = validate_density(&diag(&[1.0, -0.1]), 1e-10).unwrap();
        assert!(!bad.ok);
        assert!((bad.min_eigenvalue + 0.1).abs() < 1e-14);
        assert!(validate_density(&linalg::zeros(2, 3), 1e-10).is_err());
    }

    #[test]
    fn density_from_state_examples() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rho = density_from_state(&StateVector::from_slice(&[ONE, c(0.0, 0.0)]).unwrap());
        assert_eq!(rho.matrix(), &diag(&[1.0, 0.0]));

        let rho = density_from_state(&StateVector::from_slice(&[c(s, 0.0), c(s, 0.0)]).unwrap());
        let expected = CMatrix::from_element(2, 2, c(0.5, 0.0));
        assert!(max_norm(&(rho.matrix() - expected)) < 1e-15);

        // (1, i)/sqrt2 -> 1/2 [[1, -i], [i, 1]]
        let rho = density_from_state(&StateVector::from_slice(&[c(s, 0.0), c(0.0, s)]).unwrap());
        let expected = linalg::from_rows(&[&[c(0.5, 0.0), c(0.0, -0.5)], &[c(0.0, 0.5), c(0.5, 0.0)]]);
        assert!(max_norm(&(rho.matrix() - expected)) < 1e-15);
    }

    #[test]
    fn normalize_rejects_dark_state() {
        assert!(matches!(DensityOperator::dark(2).normalized(), Err(Error::DarkState)));
    }

    proptest! {
        #[test]
        fn hermitian_quantum_values_are_real(seed in any::<u64>(), d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(&mut rng, d);
            let x = random::hermitian(&mut rng, d);
            let v = quantum_value(&rho, &x).unwrap();
            let bound = 1e-12 * linalg::spectral_norm(rho.matrix()).max(1e-300) * linalg::spectral_norm(&x).max(1.0);
            prop_assert!(v.im.abs() <= bound.max(1e-14));
        }

        #[test]
        fn basis_expansion_resums(seed in any::<u64>(), d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random::hermitian(&mut rng, d);
            let b = hermitian_basis(d).unwrap();
            let back = b.resum(&b.expand(&h).unwrap()).unwrap();
            prop_assert!(max_norm(&(back - &h)) <= 1e-10 * max_norm(&h).max(1.0));
        }

        #[test]
        fn outer_products_are_valid_densities(seed in any::<u64>(), d in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = random::state_vector(&mut rng, d);
            let rho = density_from_state(&psi);
            prop_assert!(validate_density(rho.matrix(), 1e-12).unwrap().ok);
            prop_assert!((rho.intensity() - psi.intensity()).abs() < 1e-12);
        }

        #[test]
        fn quantum_value_is_additive(seed in any::<u64>(), d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r1 = random::density(&mut rng, d);
            let r2 = random::density(&mut rng, d);
            let x = random::complex_matrix(&mut rng, d, d);
            let lhs = quantum_value(&r1.combine(&r2).unwrap(), &x).unwrap();
            let rhs = quantum_value(&r1, &x).unwrap() + quantum_value(&r2, &x).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-12);
            // conjugate symmetry for Hermitian rho
            let xa = quantum_value(&r1, &x.adjoint()).unwrap();
            prop_assert!((xa - quantum_value(&r1, &x).unwrap().conj()).norm() < 1e-12);
        }
    }
}
