//! Random test objects: Ginibre matrices, Haar-ish states, random
//! measures and channels. Used by property tests and the acceptance suite.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{self, c, CMatrix, CVector, C64};
use crate::measures::QuantumMeasure;
use crate::ops::{density_from_state, DensityOperator, StateVector};
use crate::superop::KrausSet;

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im)
}

pub fn complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    linalg::hermitize(&complex_matrix(rng, d, d))
}

/// Uniformly random unit vector.
pub fn state_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> StateVector {
    let v = CVector::from_fn(d, |_, _| complex_gaussian(rng));
    let n = v.norm();
    StateVector::new(v.unscale(n)).expect("finite gaussian vector")
}

pub fn pure_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    density_from_state(&state_vector(rng, d))
}

/// Trace-one full-rank density `G G* / tr(G G*)`.
pub fn density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    let g = complex_matrix(rng, d, d);
    let m = &g * g.adjoint();
    let t = linalg::trace(&m).re;
    DensityOperator::from_trusted(linalg::scale(&m, 1.0 / t))
}

pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    let qr = complex_matrix(rng, d, d).qr();
    let q = qr.q();
    let r = qr.r();
    // fix column phases so the distribution is Haar
    let phases = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            let z = r[(i, i)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                linalg::ONE
            }
        } else {
            linalg::ZERO
        }
    });
    q * phases
}

/// Random `k`-element measure `S^{-1/2} G_k S^{-1/2}` with `S = sum G_k`.
pub fn measure<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> QuantumMeasure {
    let gs: Vec<CMatrix> = (0..k)
        .map(|_| {
            let g = complex_matrix(rng, d, d);
            &g * g.adjoint()
        })
        .collect();
    let total = gs.iter().fold(linalg::zeros(d, d), |acc, g| acc + g);
    let inv_sqrt = linalg::eigh(&total).map(|l| c(1.0 / l.sqrt(), 0.0));
    let elements = gs.iter().map(|g| linalg::hermitize(&(&inv_sqrt * g * &inv_sqrt))).collect();
    QuantumMeasure::new(elements).expect("normalized random measure")
}

/// `n` Ginibre Kraus operators scaled by `1/sqrt(n d)`.
pub fn kraus_set<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> KrausSet {
    let s = 1.0 / ((n * d) as f64).sqrt();
    let ops = (0..n).map(|_| linalg::scale(&complex_matrix(rng, d, d), s)).collect();
    KrausSet::new(ops).expect("nonempty kraus set")
}

/// Trace-preserving channel from a random isometry.
pub fn channel<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> KrausSet {
    let ops: Vec<CMatrix> = (0..n).map(|_| complex_matrix(rng, d, d)).collect();
    let pi = ops.iter().fold(linalg::zeros(d, d), |acc, t| acc + t.adjoint() * t);
    let inv_sqrt = linalg::eigh(&pi).map(|l| c(1.0 / l.sqrt(), 0.0));
    KrausSet::new(ops.iter().map(|t| t * &inv_sqrt).collect()).expect("nonempty kraus set")
}
