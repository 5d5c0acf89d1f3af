//! Polarization calculus for a single beam: Stokes vectors, Jones filters,
//! 50/50 beam splitters and the measures defined by splitter cascades.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::measures::QuantumMeasure;
use crate::ops::{quantum_value, DensityOperator};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesVector {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl StokesVector {
    /// Requires `S0 >= |S|` (within `1e-12 * max(S0, 1)`).
    pub fn new(s0: f64, s1: f64, s2: f64, s3: f64) -> Result<Self> {
        let s = StokesVector { s0, s1, s2, s3 };
        if ![s0, s1, s2, s3].iter().all(|x| x.is_finite()) {
            return Err(Error::contract("Stokes components must be finite"));
        }
        if s.polarized_intensity() > s0 + TOL * s0.abs().max(1.0) {
            return Err(Error::contract(format!(
                "Stokes bound violated: |S| = {} exceeds S0 = {s0}",
                s.polarized_intensity()
            )));
        }
        Ok(s)
    }

    /// `|S| = sqrt(S1^2 + S2^2 + S3^2)`.
    pub fn polarized_intensity(&self) -> f64 {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

/// `rho = (S0 sigma_0 + S . sigma) / 2`.
pub fn stokes_to_density(s: &StokesVector) -> Result<DensityOperator> {
    let s = StokesVector::new(s.s0, s.s1, s.s2, s.s3)?;
    let m = [s.s0, s.s1, s.s2, s.s3]
        .iter()
        .enumerate()
        .fold(linalg::zeros(2, 2), |acc, (k, &sk)| acc + linalg::pauli(k) * c(0.5 * sk, 0.0));
    DensityOperator::new(m)
}

/// `S_k = tr(rho sigma_k)`.
pub fn density_to_stokes(rho: &DensityOperator) -> Result<StokesVector> {
    ensure_dim(2, rho.dim())?;
    let s: Vec<f64> = (0..4).map(|k| quantum_value(rho, &linalg::pauli(k)).map(|v| v.re)).collect::<Result<_>>()?;
    // a valid density satisfies the bound up to rounding
    Ok(StokesVector { s0: s[0], s1: s[1], s2: s[2], s3: s[3] })
}

/// `|S| / S0`, clamped to `[0, 1]`.
pub fn degree_of_polarization(s: &StokesVector) -> Result<f64> {
    if s.s0 <= 0.0 {
        return Err(Error::DarkState);
    }
    Ok((s.polarized_intensity() / s.s0).clamp(0.0, 1.0))
}

/// Complex 2x2 transmission matrix of a polarization filter.
#[derive(Debug, Clone, PartialEq)]
pub struct JonesMatrix {
    t: CMatrix,
}

impl JonesMatrix {
    pub fn new(t: CMatrix) -> Result<Self> {
        if t.shape() != (2, 2) {
            return Err(Error::contract(format!("Jones matrix must be 2x2, got {:?}", t.shape())));
        }
        if !linalg::is_finite(&t) {
            return Err(Error::contract("Jones matrix has non-finite entries"));
        }
        Ok(JonesMatrix { t })
    }

    /// Jones matrix with spectral norm at most one.
    pub fn passive(t: CMatrix) -> Result<Self> {
        let j = Self::new(t)?;
        let norm = linalg::spectral_norm(&j.t);
        if norm > 1.0 + 1e-12 {
            return Err(Error::contract(format!("Jones matrix is active: spectral norm {norm}")));
        }
        Ok(j)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.t
    }

    /// Uniform attenuator `gamma * 1`.
    pub fn attenuator(gamma: f64) -> Self {
        JonesMatrix { t: linalg::identity(2) * c(gamma, 0.0) }
    }

    /// Perfect polarizer `phi phi*` for a unit vector `phi`.
    pub fn polarizer(phi: &linalg::CVector) -> Result<Self> {
        ensure_dim(2, phi.len())?;
        if (phi.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::contract("polarizer direction must be a unit vector"));
        }
        Ok(JonesMatrix { t: linalg::outer(phi, phi) })
    }
}

/// `rho' = T rho T*`.
pub fn apply_jones(rho: &DensityOperator, t: &JonesMatrix) -> Result<DensityOperator> {
    ensure_dim(2, rho.dim())?;
    Ok(DensityOperator::from_trusted(t.matrix() * rho.matrix() * t.matrix().adjoint()))
}

/// Blockwise splitter matrix `(1/sqrt 2) [[1, 1], [1, -1]] (x) 1_2`.
pub fn splitter_matrix() -> CMatrix {
    let h = linalg::from_rows(&[&[linalg::ONE, linalg::ONE], &[linalg::ONE, -linalg::ONE]])
        * c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    linalg::kron(&h, &linalg::identity(2))
}

/// Half-silvered mirror acting on a two-beam state (4x4, 2x2 blocks of 2x2).
pub fn beam_splitter(rho_in: &DensityOperator) -> Result<DensityOperator> {
    ensure_dim(4, rho_in.dim())?;
    let t = splitter_matrix();
    Ok(DensityOperator::from_trusted(&t * rho_in.matrix() * t.adjoint()))
}

/// Binary tree of beam splitters with passive Jones filters at the leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum OpticalNetwork {
    Split(Box<OpticalNetwork>, Box<OpticalNetwork>),
    Leaf(JonesMatrix),
}

impl OpticalNetwork {
    /// Leaf with a passivity check on the Jones matrix.
    pub fn leaf(t: CMatrix) -> Result<Self> {
        Ok(OpticalNetwork::Leaf(JonesMatrix::passive(t)?))
    }

    pub fn split(left: OpticalNetwork, right: OpticalNetwork) -> Self {
        OpticalNetwork::Split(Box::new(left), Box::new(right))
    }

    /// Leaves in left-to-right order with their splitter depth.
    pub fn leaves(&self) -> Vec<(&JonesMatrix, u32)> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a OpticalNetwork, depth: u32, out: &mut Vec<(&'a JonesMatrix, u32)>) {
            match n {
                OpticalNetwork::Leaf(j) => out.push((j, depth)),
                OpticalNetwork::Split(l, r) => {
                    walk(l, depth + 1, out);
                    walk(r, depth + 1, out);
                }
            }
        }
        walk(self, 0, &mut out);
        out
    }
}

/// Measure of a splitter cascade: `P_k = 2^-s_k T_k* T_k` for each leaf,
/// null element `P_0 = 1 - sum P_k`.
pub fn cascade_measure(net: &OpticalNetwork) -> Result<QuantumMeasure> {
    let labeled: Vec<CMatrix> = net
        .leaves()
        .into_iter()
        .map(|(j, depth)| {
            let attenuation = 0.5f64.powi(depth as i32);
            j.matrix().adjoint() * j.matrix() * c(attenuation, 0.0)
        })
        .collect();
    let sum = labeled.iter().fold(linalg::zeros(2, 2), |acc, p| acc + p);
    let null = linalg::identity(2) - sum;
    let min_eigenvalue = linalg::min_eigenvalue(&null);
    if min_eigenvalue < -1e-12 {
        return Err(Error::LossyNetwork { min_eigenvalue });
    }
    QuantumMeasure::with_null(null, labeled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, max_norm, CVector, ONE, ZERO};
    use crate::measures::{response_probabilities, validate_measure};
    use crate::ops::density_from_state;
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stokes_examples() {
        let rho = stokes_to_density(&StokesVector::new(1.0, 0.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(max_norm(&(rho.matrix() - diag(&[0.5, 0.5]))) < 1e-15);
        let rho = stokes_to_density(&StokesVector::new(1.0, 0.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(max_norm(&(rho.matrix() - diag(&[1.0, 0.0]))) < 1e-15);
        let rho = DensityOperator::new(CMatrix::from_element(2, 2, c(0.5, 0.0))).unwrap();
        let s = density_to_stokes(&rho).unwrap();
        assert!((s.s0 - 1.0).abs() < 1e-15 && (s.s1 - 1.0).abs() < 1e-15);
        assert!(s.s2.abs() < 1e-15 && s.s3.abs() < 1e-15);
        assert!(StokesVector::new(1.0, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn polarization_degree() {
        let dop = |s: StokesVector| degree_of_polarization(&s).unwrap();
        assert_eq!(dop(StokesVector::new(1.0, 0.0, 0.0, 0.0).unwrap()), 0.0);
        assert_eq!(dop(StokesVector::new(1.0, 0.0, 0.0, 1.0).unwrap()), 1.0);
        let s = StokesVector::new(1.0, 0.6, 0.0, 0.8).unwrap();
        assert!((dop(s) - 1.0).abs() < 1e-15);
        // fully polarized <=> det rho = 0
        let det = stokes_to_density(&s).unwrap().matrix().determinant();
        assert!(det.norm() < 1e-15);
        assert!(matches!(
            degree_of_polarization(&StokesVector::new(0.0, 0.0, 0.0, 0.0).unwrap()),
            Err(Error::DarkState)
        ));
    }

    #[test]
    fn jones_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rho = random::density(&mut rng, 2);
        let same = apply_jones(&rho, &JonesMatrix::new(linalg::identity(2)).unwrap()).unwrap();
        assert_eq!(same.matrix(), rho.matrix());
        let dim = apply_jones(&rho, &JonesMatrix::attenuator(0.5)).unwrap();
        assert!((dim.intensity() - 0.25).abs() < 1e-15);
        assert!(max_norm(&(dim.matrix() - rho.matrix() * c(0.25, 0.0))) < 1e-15);
        let u = random::unitary(&mut rng, 2);
        assert!((apply_jones(&rho, &JonesMatrix::new(u).unwrap()).unwrap().intensity() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn malus_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = random::state_vector(&mut rng, 2);
        let psi = random::state_vector(&mut rng, 2);
        let out = apply_jones(&density_from_state(&psi), &JonesMatrix::polarizer(phi.components()).unwrap()).unwrap();
        let amp = phi.components().dotc(psi.components()).norm_sqr();
        assert!((out.intensity() - amp).abs() < 1e-14);
    }

    #[test]
    fn beam_splitter_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = random::density(&mut rng, 2);
        let mut input = linalg::zeros(4, 4);
        input.view_mut((0, 0), (2, 2)).copy_from(rho.matrix());
        let input = DensityOperator::new(input).unwrap();
        let out = beam_splitter(&input).unwrap();
        let half = rho.matrix() * c(0.5, 0.0);
        let expected = linalg::kron(&CMatrix::from_element(2, 2, ONE), &half);
        assert!(max_norm(&(out.matrix() - expected)) < 1e-15);
        let twice = beam_splitter(&out).unwrap();
        assert!(max_norm(&(twice.matrix() - input.matrix())) < 1e-15);
        assert_eq!(beam_splitter(&DensityOperator::dark(4)).unwrap().matrix(), &linalg::zeros(4, 4));
    }

    #[test]
    fn cascade_examples() {
        let h = diag(&[1.0, 0.0]);
        let v = diag(&[0.0, 1.0]);
        let net =
            OpticalNetwork::split(OpticalNetwork::leaf(h.clone()).unwrap(), OpticalNetwork::leaf(v.clone()).unwrap());
        let m = cascade_measure(&net).unwrap();
        assert!(m.has_null());
        assert!(max_norm(&(&m.elements()[1] - h * c(0.5, 0.0))) < 1e-15);
        assert!(max_norm(&(&m.elements()[2] - v * c(0.5, 0.0))) < 1e-15);
        assert!(max_norm(&(m.null_element().unwrap() - diag(&[0.5, 0.5]))) < 1e-15);

        let single = cascade_measure(&OpticalNetwork::leaf(linalg::identity(2)).unwrap()).unwrap();
        assert_eq!(single.labeled_elements()[0], linalg::identity(2));
        assert_eq!(single.null_element().unwrap(), &linalg::zeros(2, 2));

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random::unitary(&mut rng, 2);
        let deep = OpticalNetwork::split(
            OpticalNetwork::split(OpticalNetwork::leaf(u).unwrap(), OpticalNetwork::leaf(h_pol()).unwrap()),
            OpticalNetwork::leaf(linalg::zeros(2, 2) + diag(&[0.0, 1.0])).unwrap(),
        );
        let m = cascade_measure(&deep).unwrap();
        assert!(max_norm(&(&m.labeled_elements()[0] - diag(&[0.25, 0.25]))) < 1e-14);
    }

    fn h_pol() -> CMatrix {
        diag(&[1.0, 0.0])
    }

    #[test]
    fn active_leaf_rejected() {
        assert!(OpticalNetwork::leaf(linalg::identity(2) * c(1.5, 0.0)).is_err());
        let zero_vec = CVector::from_vec(vec![ZERO, ZERO]);
        assert!(JonesMatrix::polarizer(&zero_vec).is_err());
    }

    fn random_network(rng: &mut ChaCha8Rng, depth: u32) -> OpticalNetwork {
        use rand::Rng;
        if depth == 0 || rng.random::<f64>() < 0.3 {
            let t = random::complex_matrix(rng, 2, 2);
            let n = linalg::spectral_norm(&t);
            OpticalNetwork::leaf(t * c(rng.random::<f64>() / n, 0.0)).unwrap()
        } else {
            OpticalNetwork::split(random_network(rng, depth - 1), random_network(rng, depth - 1))
        }
    }

    proptest! {
        #[test]
        fn stokes_roundtrip(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(&mut rng, 2).scaled(2.5).unwrap();
            let back = stokes_to_density(&density_to_stokes(&rho).unwrap()).unwrap();
            prop_assert!(max_norm(&(back.matrix() - rho.matrix())) < 1e-12);
        }

        #[test]
        fn jones_preserves_psd(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random::density(&mut rng, 2);
            let t = JonesMatrix::new(random::complex_matrix(&mut rng, 2, 2)).unwrap();
            let out = apply_jones(&rho, &t).unwrap();
            prop_assert!(linalg::min_eigenvalue(out.matrix()) >= -1e-12 * out.intensity().max(1.0));
        }

        #[test]
        fn cascade_rates_sum_to_intensity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&mut rng, 3);
            let m = cascade_measure(&net).unwrap();
            prop_assert!(validate_measure(m.elements(), 1e-12).unwrap().sum_defect < 1e-12);
            let rho = random::density(&mut rng, 2).scaled(1.7).unwrap();
            let p = response_probabilities(&m, &rho).unwrap();
            prop_assert!((p.iter().sum::<f64>() - rho.intensity()).abs() < 1e-12);
            for ((j, depth), pk) in net.leaves().iter().zip(&p[1..]) {
                let filtered = apply_jones(&rho, j).unwrap().intensity() * 0.5f64.powi(*depth as i32);
                prop_assert!((filtered - pk).abs() < 1e-12);
            }
        }
    }
}
