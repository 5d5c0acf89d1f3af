//! Superoperators, the Choi transform, Kraus (operator-sum) expansions and
//! filter classification.
//!
//! A superoperator on `d x d` matrices is stored as the `d^2 x d^2` matrix
//! `M[(a d + b, j d + k)] = E_abjk`, so that `vec(E(X)) = M vec(X)` with
//! row-major vectorization. The Choi transform swaps the middle indices,
//! `Ehat_abjk = E_ajbk`; for `E(X) = T X T*` it yields `vec(T) vec(T)*`, so
//! Kraus operators are the row-major unvectorized eigenvectors of the Choi
//! matrix scaled by the square roots of its eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, eigh, CMatrix};

/// Default threshold for Choi eigenvalue clipping and rank decisions.
pub const DEFAULT_TOL_CP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        ensure_dim(dim * dim, matrix.nrows())?;
        ensure_dim(dim * dim, matrix.ncols())?;
        if !linalg::is_finite(&matrix) {
            return Err(Error::contract("superoperator has non-finite entries"));
        }
        Ok(SuperOperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOperator { dim, matrix: linalg::identity(dim * dim) }
    }

    pub fn zero(dim: usize) -> Self {
        SuperOperator { dim, matrix: linalg::zeros(dim * dim, dim * dim) }
    }

    /// Transpose map `X -> X^T`.
    pub fn transpose_map(dim: usize) -> Self {
        let mut m = linalg::zeros(dim * dim, dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                m[(a * dim + b, b * dim + a)] = linalg::ONE;
            }
        }
        SuperOperator { dim, matrix: m }
    }

    /// Build from a closure by acting on the matrix units `e_j e_k*`.
    pub fn from_fn(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut m = linalg::zeros(dim * dim, dim * dim);
        for j in 0..dim {
            for k in 0..dim {
                let mut unit = linalg::zeros(dim, dim);
                unit[(j, k)] = linalg::ONE;
                let out = linalg::vec_rm(&f(&unit));
                m.set_column(j * dim + k, &out);
            }
        }
        SuperOperator { dim, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Component `E_abjk`.
    pub fn component(&self, a: usize, b: usize, j: usize, k: usize) -> linalg::C64 {
        let d = self.dim;
        self.matrix[(a * d + b, j * d + k)]
    }

    pub fn linear_combination(&self, alpha: f64, other: &SuperOperator, beta: f64) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        Ok(SuperOperator { dim: self.dim, matrix: &self.matrix * c(alpha, 0.0) + &other.matrix * c(beta, 0.0) })
    }

    /// `E(X)` with `E(X)_ab = sum_jk E_abjk X_jk`.
    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim, x.nrows())?;
        ensure_dim(self.dim, x.ncols())?;
        Ok(linalg::unvec_rm(&(&self.matrix * linalg::vec_rm(x)), self.dim))
    }

    /// Composition `self after other`.
    pub fn compose(&self, other: &SuperOperator) -> Result<Self> {
        ensure_dim(self.dim, other.dim)?;
        Ok(SuperOperator { dim: self.dim, matrix: &self.matrix * &other.matrix })
    }

    /// Whether `E(X*) = E(X)*` for all X, up to `tol`.
    pub fn is_hermiticity_preserving(&self, tol: f64) -> bool {
        linalg::hermitian_defect(choi_transform(self).matrix()) <= tol
    }

    /// Operator `pi(E)` with `tr E(X) = tr(pi(E) X)`.
    pub fn pi(&self) -> CMatrix {
        let d = self.dim;
        CMatrix::from_fn(d, d, |k, j| (0..d).map(|a| self.component(a, a, j, k)).sum())
    }

    /// Largest absolute difference of the action on the matrix units.
    pub fn action_distance(&self, other: &SuperOperator) -> f64 {
        linalg::max_norm(&(&self.matrix - &other.matrix))
    }
}

/// Choi transform of a superoperator, stored with the same index layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    dim: usize,
    matrix: CMatrix,
}

fn swap_middle(dim: usize, m: &CMatrix) -> CMatrix {
    let d = dim;
    CMatrix::from_fn(d * d, d * d, |row, col| {
        let (a, b) = (row / d, row % d);
        let (j, k) = (col / d, col % d);
        m[(a * d + j, b * d + k)]
    })
}

impl ChoiMatrix {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        ensure_dim(dim * dim, matrix.nrows())?;
        ensure_dim(dim * dim, matrix.ncols())?;
        Ok(ChoiMatrix { dim, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Inverse Choi transform.
    pub fn to_superop(&self) -> SuperOperator {
        SuperOperator { dim: self.dim, matrix: swap_middle(self.dim, &self.matrix) }
    }

    /// The Choi transform read as a superoperator `X -> Ehat(X)`.
    pub fn as_superop(&self) -> SuperOperator {
        SuperOperator { dim: self.dim, matrix: self.matrix.clone() }
    }

    /// Rank counting eigenvalues above `tol * max eigenvalue`.
    pub fn rank(&self, tol: f64) -> usize {
        let e = eigh(&self.matrix);
        let top = e.max();
        if top <= 0.0 {
            return 0;
        }
        e.values.iter().filter(|&&l| l > tol * top).count()
    }
}

/// `Ehat_abjk = E_ajbk`. Involutive.
pub fn choi_transform(e: &SuperOperator) -> ChoiMatrix {
    ChoiMatrix { dim: e.dim, matrix: swap_middle(e.dim, &e.matrix) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpReport {
    pub hermitian_defect: f64,
    pub min_choi_eigenvalue: f64,
    pub cp: bool,
}

pub fn is_completely_positive(e: &SuperOperator, tol: f64) -> CpReport {
    let choi = choi_transform(e);
    let hermitian_defect = linalg::hermitian_defect(choi.matrix());
    let min_choi_eigenvalue = eigh(choi.matrix()).min();
    CpReport { hermitian_defect, min_choi_eigenvalue, cp: hermitian_defect <= tol && min_choi_eigenvalue >= -tol }
}

/// Operator-sum expansion `E(X) = sum_l T_l X T_l*`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let first = operators.first().ok_or_else(|| Error::contract("Kraus set is empty"))?;
        let d = first.nrows();
        for t in &operators {
            if !t.is_square() {
                return Err(Error::contract("Kraus operators must be square"));
            }
            ensure_dim(d, t.nrows())?;
            if !linalg::is_finite(t) {
                return Err(Error::contract("Kraus operator has non-finite entries"));
            }
        }
        Ok(KrausSet { dim: d, operators })
    }

    /// Single transmission operator `X -> T X T*`.
    pub fn nonmixing(t: CMatrix) -> Result<Self> {
        Self::new(vec![t])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        ensure_dim(self.dim, x.nrows())?;
        Ok(self.operators.iter().fold(linalg::zeros(self.dim, self.dim), |acc, t| acc + t * x * t.adjoint()))
    }
}

/// Superoperator of a Kraus expansion, `E_abjk = sum_l T_aj conj(T_bk)`.
pub fn superop_from_kraus(k: &KrausSet) -> SuperOperator {
    let d = k.dim;
    let mut m = linalg::zeros(d * d, d * d);
    for t in &k.operators {
        m += linalg::kron(t, &t.map(|z| z.conj()));
    }
    SuperOperator { dim: d, matrix: m }
}

/// Canonical Kraus operators from the eigendecomposition of a Choi matrix.
///
/// Eigenvalues are taken in descending order; those at or below
/// `tol * max eigenvalue` are dropped. Each eigenvector's phase is fixed so
/// its first non-negligible component is real and positive.
pub fn kraus_from_choi(choi: &ChoiMatrix, tol: f64) -> Result<KrausSet> {
    let herm = linalg::hermitian_defect(choi.matrix());
    let scale = linalg::max_norm(choi.matrix()).max(1.0);
    if herm > tol * scale {
        return Err(Error::contract(format!("Choi matrix not Hermitian (defect {herm:.3e})")));
    }
    let e = eigh(choi.matrix());
    let top = e.max();
    if e.min() < -tol * top.max(1.0) {
        return Err(Error::NotCompletelyPositive { min_eigenvalue: e.min() });
    }
    if top <= 0.0 {
        return Err(Error::contract("zero map has no Kraus operators"));
    }
    let d = choi.dim;
    let mut ops = Vec::new();
    for i in (0..e.values.len()).rev() {
        let lam = e.values[i];
        if lam <= tol * top {
            break;
        }
        let mut v = e.vector(i);
        linalg::canonical_phase(&mut v, 1e-12);
        ops.push(linalg::unvec_rm(&v, d) * c(lam.sqrt(), 0.0));
    }
    KrausSet::new(ops)
}

/// Clip negative Choi eigenvalues, returning the nearest CP map in the
/// Frobenius norm of the Hermitian part and the clipping distance.
pub fn project_cp(e: &SuperOperator) -> (SuperOperator, f64) {
    let choi = choi_transform(e);
    let eig = eigh(choi.matrix());
    let clipped = eig.map(|l| c(l.max(0.0), 0.0));
    let dist = (choi.matrix() - &clipped).norm();
    (ChoiMatrix { dim: e.dim, matrix: clipped }.to_superop(), dist)
}

/// `pi(E) = sum_l T_l* T_l`.
pub fn pi_operator(k: &KrausSet) -> CMatrix {
    k.operators.iter().fold(linalg::zeros(k.dim, k.dim), |acc, t| acc + t.adjoint() * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub lossless: bool,
    pub passive: bool,
    pub active: bool,
    pub mixing: bool,
    pub choi_rank: usize,
    pub max_pi_eigenvalue: f64,
}

/// Lossless iff `pi = 1`, passive iff `pi <= 1`, active otherwise; mixing
/// iff the Choi rank exceeds one.
pub fn classify(k: &KrausSet, tol: f64) -> Classification {
    let pi = pi_operator(k);
    let lossless = linalg::max_norm(&(&pi - linalg::identity(k.dim))) <= tol;
    let max_pi_eigenvalue = linalg::max_eigenvalue(&pi);
    let passive = max_pi_eigenvalue <= 1.0 + tol;
    let choi_rank = choi_transform(&superop_from_kraus(k)).rank(tol);
    Classification { lossless, passive, active: !passive, mixing: choi_rank > 1, choi_rank, max_pi_eigenvalue }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_norm, pauli, CVector, C64};
    use crate::ops::DensityOperator;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Basis formula `Ehat(X) = sum_jk E(e_j e_k*) X e_k e_j*`, evaluated
    /// without the index permutation.
    fn choi_action_by_basis(e: &SuperOperator, x: &CMatrix) -> CMatrix {
        let d = e.dim();
        let mut out = linalg::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                let mut ejk = linalg::zeros(d, d);
                ejk[(j, k)] = linalg::ONE;
                let mut ekj = linalg::zeros(d, d);
                ekj[(k, j)] = linalg::ONE;
                out += e.apply(&ejk).unwrap() * x * ekj;
            }
        }
        out
    }

    #[test]
    fn apply_examples() {
        let x = linalg::from_rows(&[&[c(1.0, 2.0), c(0.5, 0.0)], &[c(-1.0, 0.0), c(0.0, 3.0)]]);
        assert_eq!(SuperOperator::identity(2).apply(&x).unwrap(), x);
        let flip = superop_from_kraus(&KrausSet::nonmixing(pauli(1)).unwrap());
        assert!(max_norm(&(flip.apply(&diag(&[1.0, 0.0])).unwrap() - diag(&[0.0, 1.0]))) < 1e-15);
        assert_eq!(SuperOperator::zero(2).apply(&x).unwrap(), linalg::zeros(2, 2));
        assert!(SuperOperator::identity(2).apply(&linalg::identity(3)).is_err());
    }

    #[test]
    fn choi_of_conjugation_is_t_tr_tstar() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [linalg::identity(2), pauli(1)] {
            let e = superop_from_kraus(&KrausSet::nonmixing(t.clone()).unwrap());
            let choi = choi_transform(&e).as_superop();
            let x = random::complex_matrix(&mut rng, 2, 2);
            let expected = &t * linalg::trace(&(t.adjoint() * &x));
            assert!(max_norm(&(choi.apply(&x).unwrap() - expected)) < 1e-14);
        }
        assert_eq!(choi_transform(&SuperOperator::zero(3)).matrix(), &linalg::zeros(9, 9));
    }

    #[test]
    fn choi_matches_basis_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..5 {
            let e = SuperOperator::from_matrix(d, random::complex_matrix(&mut rng, d * d, d * d)).unwrap();
            let x = random::complex_matrix(&mut rng, d, d);
            let direct = choi_transform(&e).as_superop().apply(&x).unwrap();
            assert!(max_norm(&(direct - choi_action_by_basis(&e, &x))) < 1e-12);
        }
    }

    #[test]
    fn cp_examples() {
        assert!(is_completely_positive(&SuperOperator::identity(2), 1e-12).cp);
        let t = is_completely_positive(&SuperOperator::transpose_map(2), 1e-12);
        assert!(!t.cp);
        assert!((t.min_choi_eigenvalue + 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random::kraus_set(&mut rng, 3, 4);
        assert!(is_completely_positive(&superop_from_kraus(&k), 1e-12).cp);
    }

    #[test]
    fn kraus_of_identity_is_identity() {
        let choi = choi_transform(&SuperOperator::identity(3));
        let k = kraus_from_choi(&choi, DEFAULT_TOL_CP).unwrap();
        assert_eq!(k.operators().len(), 1);
        // canonical phase makes the first entry real positive
        assert!(max_norm(&(&k.operators()[0] - linalg::identity(3))) < 1e-12);
    }

    #[test]
    fn kraus_of_depolarizer() {
        let dep = SuperOperator::from_fn(2, |x| linalg::identity(2) * (linalg::trace(x) * 0.5));
        let k = kraus_from_choi(&choi_transform(&dep), DEFAULT_TOL_CP).unwrap();
        assert_eq!(k.operators().len(), 4);
        let back = superop_from_kraus(&k);
        assert!(back.action_distance(&dep) < 1e-12);
        // the Pauli set sigma_mu / 2 reproduces the same map
        let paulis = KrausSet::new((0..4).map(|i| linalg::scale(&pauli(i), 0.5)).collect()).unwrap();
        assert!(superop_from_kraus(&paulis).action_distance(&dep) < 1e-14);
    }

    #[test]
    fn kraus_of_zero_or_indefinite() {
        assert!(kraus_from_choi(&choi_transform(&SuperOperator::zero(2)), 1e-9).is_err());
        let err = kraus_from_choi(&choi_transform(&SuperOperator::transpose_map(2)), 1e-9).unwrap_err();
        assert!(matches!(err, Error::NotCompletelyPositive { .. }));
    }

    #[test]
    fn superop_from_kraus_examples() {
        assert_eq!(superop_from_kraus(&KrausSet::nonmixing(linalg::identity(2)).unwrap()), SuperOperator::identity(2));
        let z = superop_from_kraus(&KrausSet::nonmixing(pauli(3)).unwrap());
        let x = linalg::from_rows(&[&[c(1.0, 0.0), c(2.0, 1.0)], &[c(3.0, 0.0), c(4.0, 0.0)]]);
        assert!(max_norm(&(z.apply(&x).unwrap() - pauli(3) * &x * pauli(3))) < 1e-15);
        let pair = KrausSet::new(vec![pauli(1), pauli(2)]).unwrap();
        let sum = superop_from_kraus(&KrausSet::nonmixing(pauli(1)).unwrap())
            .linear_combination(1.0, &superop_from_kraus(&KrausSet::nonmixing(pauli(2)).unwrap()), 1.0)
            .unwrap();
        assert!(superop_from_kraus(&pair).action_distance(&sum) < 1e-15);
    }

    #[test]
    fn classification_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random::unitary(&mut rng, 3);
        let cl = classify(&KrausSet::nonmixing(u).unwrap(), 1e-9);
        assert!(cl.lossless && cl.passive && !cl.mixing && !cl.active);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = CVector::from_vec(vec![c(s, 0.0), c(0.0, s)]);
        let pol = linalg::outer(&phi, &phi);
        let k = KrausSet::nonmixing(pol.clone()).unwrap();
        assert!(max_norm(&(pi_operator(&k) - &pol)) < 1e-15);
        let cl = classify(&k, 1e-9);
        assert!(cl.passive && !cl.lossless && !cl.active);

        let amp = KrausSet::nonmixing(linalg::identity(2) * C64::new(2f64.sqrt(), 0.0)).unwrap();
        assert!(max_norm(&(pi_operator(&amp) - linalg::identity(2) * c(2.0, 0.0))) < 1e-14);
        assert!(classify(&amp, 1e-9).active);

        let dep = KrausSet::new((0..4).map(|i| linalg::scale(&pauli(i), 0.5)).collect()).unwrap();
        let cl = classify(&dep, 1e-9);
        assert!(cl.mixing && cl.lossless && cl.choi_rank == 4);
    }

    #[test]
    fn superop_pi_matches_kraus_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = random::kraus_set(&mut rng, 3, 3);
        assert!(max_norm(&(superop_from_kraus(&k).pi() - pi_operator(&k))) < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn choi_is_a_linear_involution(seed in any::<u64>(), d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = SuperOperator::from_matrix(d, random::complex_matrix(&mut rng, d * d, d * d)).unwrap();
            let f = SuperOperator::from_matrix(d, random::complex_matrix(&mut rng, d * d, d * d)).unwrap();
            prop_assert_eq!(choi_transform(&e).to_superop(), e.clone());
            prop_assert_eq!(choi_transform(&choi_transform(&e).as_superop()).as_superop(), e.clone());
            let (a, b) = (0.75, -2.0);
            let lhs = choi_transform(&e.linear_combination(a, &f, b).unwrap());
            let rhs = choi_transform(&e).as_superop().linear_combination(a, &choi_transform(&f).as_superop(), b).unwrap();
            prop_assert_eq!(lhs.matrix(), rhs.matrix());
        }

        #[test]
        fn kraus_roundtrip(seed in any::<u64>(), d in 2usize..5, n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random::kraus_set(&mut rng, d, n);
            let e = superop_from_kraus(&k);
            let k2 = kraus_from_choi(&choi_transform(&e), DEFAULT_TOL_CP).unwrap();
            prop_assert_eq!(k2.operators().len(), n.min(d * d));
            prop_assert!(superop_from_kraus(&k2).action_distance(&e) < 1e-10);
        }

        #[test]
        fn output_intensity_is_tr_pi_rho(seed in any::<u64>(), d in 1usize..5, n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random::kraus_set(&mut rng, d, n);
            let rho = random::density(&mut rng, d);
            let out = k.apply(rho.matrix()).unwrap();
            let lhs = linalg::trace(&out);
            let rhs = linalg::trace(&(pi_operator(&k) * rho.matrix()));
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let tol = crate::ops::Tolerances { herm: 1e-10, psd: 1e-10 };
            prop_assert!(DensityOperator::with_tolerances(out, tol).is_ok());
        }
    }
}
