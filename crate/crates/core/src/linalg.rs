//! Dense complex linear algebra helpers shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Whenever a matrix is
//! flattened into a vector (superoperators, Choi matrices, least-squares
//! designs) the convention is **row-major**: entry `(a, b)` of a `d x d`
//! matrix lands at index `a * d + b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Build a matrix from row-major real/complex pairs.
pub fn from_rows(rows: &[&[C64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn diag(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// Pauli matrix `sigma_k`, with `sigma_0` the 2x2 identity.
pub fn pauli(k: usize) -> CMatrix {
    match k {
        0 => identity(2),
        1 => from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        2 => from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        3 => from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest absolute entry.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_norm(&(m - m.adjoint()))
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hilbert-Schmidt inner product `tr(a* b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn scale(m: &CMatrix, s: f64) -> CMatrix {
    m * c(s, 0.0)
}

/// Row-major vectorization.
pub fn vec_rm(m: &CMatrix) -> CVector {
    let (r, k) = m.shape();
    CVector::from_fn(r * k, |idx, _| m[(idx / k, idx % k)])
}

/// Inverse of [`vec_rm`] for a square `d x d` matrix.
pub fn unvec_rm(v: &CVector, d: usize) -> CMatrix {
    assert_eq!(v.len(), d * d, "unvec length mismatch");
    CMatrix::from_fn(d, d, |a, b| v[a * d + b])
}

pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns in the same order as `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// Rebuild `sum_i f(lambda_i) v_i v_i*`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let d = self.vectors.nrows();
        let mut out = zeros(d, d);
        for (i, &lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            out += (&v * v.adjoint()) * f(lam);
        }
        out
    }
}

/// Hermitian eigendecomposition after symmetrization `(m + m*)/2`.
pub fn eigh(m: &CMatrix) -> HermitianEigen {
    assert!(m.is_square(), "eigh needs a square matrix");
    let d = m.nrows();
    if d == 0 {
        return HermitianEigen { values: vec![], vectors: zeros(0, 0) };
    }
    let sym = hermitize(m);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(d, d, |r, k| eig.eigenvectors[(r, order[k])]);
    HermitianEigen { values, vectors }
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).min()
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eigh(m).max()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigh(m).values.iter().map(|l| l.abs()).sum()
}

/// `1/2 ||a - b||_1` for Hermitian arguments.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * trace_norm_hermitian(&(a - b))
}

/// Principal square root of a PSD matrix (negative eigenvalues clipped).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    eigh(m).map(|l| c(l.max(0.0).sqrt(), 0.0))
}

/// Number of singular values above `rtol * max`.
pub fn numerical_rank(singular_values: &[f64], rtol: f64) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rtol * smax).count()
}

/// Ratio of largest to smallest retained singular value.
pub fn condition_number(singular_values: &[f64]) -> f64 {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Solution of a real least-squares problem `min ||A x - b||`.
#[derive(Debug, Clone)]
pub struct LstsqReal {
    pub x: RVector,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

/// Real least squares via SVD, discarding singular values below `rcond * max`.
pub fn lstsq_real(a: &RMatrix, b: &RVector, rcond: f64) -> Result<LstsqReal> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.len() });
    }
    let svd = a.clone().svd(true, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let rank = numerical_rank(&singular_values, rcond);
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("svd without U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("svd without V".into()))?;
    let utb = u.transpose() * b;
    let mut y = RVector::zeros(singular_values.len());
    for (i, &s) in singular_values.iter().enumerate() {
        if s > rcond * smax {
            y[i] = utb[i] / s;
        }
    }
    Ok(LstsqReal { x: vt.transpose() * y, singular_values, rank })
}

/// Moore-Penrose pseudo-inverse of a complex matrix together with its
/// singular values.
pub fn pinv(a: &CMatrix, rcond: f64) -> Result<(CMatrix, Vec<f64>)> {
    let svd = a.clone().svd(true, true);
    let singular_values: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("svd without U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| Error::Numerical("svd without V".into()))?;
    let mut sinv = CMatrix::zeros(singular_values.len(), singular_values.len());
    for (i, &s) in singular_values.iter().enumerate() {
        if s > rcond * smax {
            sinv[(i, i)] = c(1.0 / s, 0.0);
        }
    }
    Ok((vt.adjoint() * sinv * u.adjoint(), singular_values))
}

/// Multiply `v` by a unit phase so that its first component with modulus
/// above `tol` is real and positive.
pub fn canonical_phase(v: &mut CVector, tol: f64) {
    if let Some(z) = v.iter().find(|z| z.norm() > tol).copied() {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}
