//! Time evolution by filter slicing and its continuum limits, canonical
//! states, spectral lines and Lie-product dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, C64, I};
use crate::ops::{quantum_value, DensityOperator, StateVector};

/// Two successive reference solutions closer than this (max norm) are
/// accepted.
pub const REFERENCE_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 16;

fn check_hermitian(h: &CMatrix, what: &str) -> Result<()> {
    if !h.is_square() {
        return Err(Error::contract(format!("{what} is not square")));
    }
    let defect = linalg::hermitian_defect(h);
    if defect > 1e-10 * linalg::max_norm(h).max(1.0) {
        return Err(Error::contract(format!("{what} is not Hermitian (defect {defect:.3e})")));
    }
    Ok(())
}

fn check_hbar(hbar: f64) -> Result<()> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(Error::contract("hbar must be positive"));
    }
    Ok(())
}

/// `i hbar K = H - i V`: Hamiltonian plus dissipative potential.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    h: CMatrix,
    v: CMatrix,
    hbar: f64,
}

impl GeneratorModel {
    pub fn new(h: CMatrix, v: Option<CMatrix>, hbar: f64) -> Result<Self> {
        check_hermitian(&h, "H")?;
        check_hbar(hbar)?;
        let d = h.nrows();
        let v = v.unwrap_or_else(|| linalg::zeros(d, d));
        ensure_dim(d, v.nrows())?;
        check_hermitian(&v, "V")?;
        let min = linalg::min_eigenvalue(&v);
        if min < -1e-10 * linalg::max_norm(&v).max(1.0) {
            return Err(Error::contract(format!("V is not positive semidefinite (min eigenvalue {min:.3e})")));
        }
        Ok(GeneratorModel { h: linalg::hermitize(&h), v: linalg::hermitize(&v), hbar })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn potential(&self) -> &CMatrix {
        &self.v
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `K = (-i H - V) / hbar`.
    pub fn generator(&self) -> CMatrix {
        (&self.h * (-I) - &self.v) / c(self.hbar, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub l: CMatrix,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladModel {
    h: CMatrix,
    jumps: Vec<JumpOperator>,
    hbar: f64,
}

impl LindbladModel {
    pub fn new(h: CMatrix, jumps: Vec<JumpOperator>, hbar: f64) -> Result<Self> {
        check_hermitian(&h, "H")?;
        check_hbar(hbar)?;
        for j in &jumps {
            ensure_dim(h.nrows(), j.l.nrows())?;
            ensure_dim(h.nrows(), j.l.ncols())?;
            if !(j.gamma >= 0.0 && j.gamma.is_finite()) {
                return Err(Error::contract(format!("negative jump rate {}", j.gamma)));
            }
        }
        Ok(LindbladModel { h: linalg::hermitize(&h), jumps, hbar })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.h
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Effective generator `K = -i H / hbar - 1/2 sum gamma L* L`.
    pub fn generator(&self) -> CMatrix {
        let mut k = &self.h * (-I / c(self.hbar, 0.0));
        for j in &self.jumps {
            k -= j.l.adjoint() * &j.l * c(0.5 * j.gamma, 0.0);
        }
        k
    }

    /// Right-hand side of the Lindblad equation.
    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let k = self.generator();
        let mut out = &k * rho + rho * k.adjoint();
        for j in &self.jumps {
            out += &j.l * rho * j.l.adjoint() * c(j.gamma, 0.0);
        }
        out
    }
}

/// Snapshots on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S = CMatrix> {
    times: Vec<f64>,
    states: Vec<S>,
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new() }
    }
}

impl<S> Trajectory<S> {
    pub fn push(&mut self, t: f64, s: S) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::contract(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.states.push(s);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &S)> {
        self.times.last().map(|&t| (t, self.states.last().unwrap()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &S)> {
        self.times.iter().copied().zip(&self.states)
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::contract("time step must be positive"));
    }
    Ok(())
}

/// Filter slicing with a time-dependent generator: `rho <- T rho T*` with
/// `T = 1 + dt K(t)`.
pub fn slice_evolution_with<F>(k: F, rho0: &CMatrix, dt: f64, steps: usize) -> Result<Trajectory>
where
    F: Fn(f64) -> CMatrix,
{
    check_step(dt)?;
    let d = rho0.nrows();
    let mut traj = Trajectory::default();
    let mut rho = rho0.clone();
    traj.push(0.0, rho.clone())?;
    for n in 0..steps {
        let t = n as f64 * dt;
        let kt = k(t);
        ensure_dim(d, kt.nrows())?;
        let tm = linalg::identity(d) + kt * c(dt, 0.0);
        rho = linalg::hermitize(&(&tm * &rho * tm.adjoint()));
        traj.push((n + 1) as f64 * dt, rho.clone())?;
    }
    Ok(traj)
}

pub fn slice_evolution(k: &CMatrix, rho0: &CMatrix, dt: f64, steps: usize) -> Result<Trajectory> {
    ensure_dim(rho0.nrows(), k.nrows())?;
    slice_evolution_with(|_| k.clone(), rho0, dt, steps)
}

/// Exact solution of the quantum Liouville equation for constant `K`:
/// `exp(K t) rho exp(K* t)`.
pub fn liouville_evolve(k: &CMatrix, rho0: &CMatrix, t: f64) -> Result<CMatrix> {
    ensure_dim(rho0.nrows(), k.nrows())?;
    let u = (k * c(t, 0.0)).exp();
    Ok(linalg::hermitize(&(&u * rho0 * u.adjoint())))
}

fn unitary_propagator(h: &CMatrix, t: f64, hbar: f64) -> CMatrix {
    linalg::eigh(h).map(|e| (-I * (e * t / hbar)).exp())
}

/// `exp(-i H t / hbar) rho exp(i H t / hbar)` via the spectral decomposition.
pub fn von_neumann_evolve(h: &CMatrix, rho0: &DensityOperator, t: f64, hbar: f64) -> Result<DensityOperator> {
    check_hermitian(h, "H")?;
    check_hbar(hbar)?;
    ensure_dim(h.nrows(), rho0.dim())?;
    let u = unitary_propagator(h, t, hbar);
    Ok(DensityOperator::from_trusted(linalg::hermitize(&(&u * rho0.matrix() * u.adjoint()))))
}

/// Decomposition `psi = sum_k psi_k` into components in the eigenspaces of
/// `H`, one per distinct energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub energies: Vec<f64>,
    pub components: Vec<CVector>,
    pub hbar: f64,
}

impl SpectralDecomposition {
    /// `psi(t) = sum_k exp(-i t E_k / hbar) psi_k`.
    pub fn evolve(&self, t: f64) -> CVector {
        let d = self.components.first().map_or(0, |v| v.len());
        self.components
            .iter()
            .zip(&self.energies)
            .fold(CVector::zeros(d), |acc, (v, &e)| acc + v * (-I * (e * t / self.hbar)).exp())
    }
}

/// Eigenvalues closer than `tol` form one energy level.
pub fn spectral_solution(h: &CMatrix, psi0: &StateVector, hbar: f64, tol: f64) -> Result<SpectralDecomposition> {
    check_hermitian(h, "H")?;
    check_hbar(hbar)?;
    ensure_dim(h.nrows(), psi0.dim())?;
    let eig = linalg::eigh(h);
    let psi = psi0.components();
    let mut energies: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, &e) in eig.values.iter().enumerate() {
        match members.last_mut() {
            Some(m) if e - eig.values[*m.last().unwrap()] < tol => m.push(i),
            _ => members.push(vec![i]),
        }
    }
    let mut components = Vec::with_capacity(members.len());
    for m in &members {
        let mut comp = CVector::zeros(psi.len());
        for &i in m {
            let v = eig.vector(i);
            comp += &v * v.dotc(psi);
        }
        energies.push(m.iter().map(|&i| eig.values[i]).sum::<f64>() / m.len() as f64);
        components.push(comp);
    }
    Ok(SpectralDecomposition { energies, components, hbar })
}

pub fn schrodinger_evolve(h: &CMatrix, psi0: &StateVector, t: f64, hbar: f64) -> Result<StateVector> {
    check_hermitian(h, "H")?;
    check_hbar(hbar)?;
    ensure_dim(h.nrows(), psi0.dim())?;
    StateVector::new(unitary_propagator(h, t, hbar) * psi0.components())
}

fn rk4_step(model: &LindbladModel, rho: &CMatrix, h: f64) -> CMatrix {
    let hc = c(h, 0.0);
    let k1 = model.rhs(rho);
    let k2 = model.rhs(&(rho + &k1 * (hc * 0.5)));
    let k3 = model.rhs(&(rho + &k2 * (hc * 0.5)));
    let k4 = model.rhs(&(rho + &k3 * hc));
    rho + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (hc / 6.0)
}

fn rk4_run(model: &LindbladModel, rho0: &CMatrix, h: f64, steps: usize, sub: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(steps + 1);
    let mut rho = rho0.clone();
    out.push(rho.clone());
    let hs = h / sub as f64;
    for _ in 0..steps {
        for _ in 0..sub {
            rho = rk4_step(model, &rho, hs);
        }
        out.push(linalg::hermitize(&rho));
    }
    out
}

/// Reference solution of the Lindblad equation on the grid `0, h, .., t`
/// with `h ~ dt`. Each grid step is integrated by classical Runge-Kutta with
/// `2^m` substeps; `m` grows until two successive runs agree to
/// [`REFERENCE_TOL`].
pub fn lindblad_evolve(model: &LindbladModel, rho0: &DensityOperator, t: f64, dt: f64) -> Result<Trajectory> {
    check_step(dt)?;
    ensure_dim(model.dim(), rho0.dim())?;
    if !(t >= 0.0) {
        return Err(Error::contract("final time must be nonnegative"));
    }
    let mut traj = Trajectory::default();
    if t == 0.0 {
        traj.push(0.0, rho0.matrix().clone())?;
        return Ok(traj);
    }
    let steps = ((t / dt).round() as usize).max(1);
    let h = t / steps as f64;
    let mut prev = rk4_run(model, rho0.matrix(), h, steps, 1);
    let mut sub = 1;
    for _ in 0..MAX_HALVINGS {
        sub *= 2;
        let next = rk4_run(model, rho0.matrix(), h, steps, sub);
        let diff = prev.iter().zip(&next).map(|(a, b)| linalg::max_norm(&(a - b))).fold(0.0, f64::max);
        prev = next;
        if diff < REFERENCE_TOL {
            for (n, s) in prev.into_iter().enumerate() {
                traj.push(n as f64 * h, s)?;
            }
            return Ok(traj);
        }
    }
    Err(Error::Numerical("reference integrator did not settle".into()))
}

/// Exact Lindblad solution `exp(t L)` applied to `vec(rho)`, with the
/// generator `L = K (x) 1 + 1 (x) conj K + sum gamma L (x) conj L` acting on
/// row-major vectorizations.
pub fn lindblad_exact(model: &LindbladModel, rho0: &DensityOperator, t: f64) -> Result<CMatrix> {
    ensure_dim(model.dim(), rho0.dim())?;
    let d = model.dim();
    let k = model.generator();
    let id = linalg::identity(d);
    let mut gen = linalg::kron(&k, &id) + linalg::kron(&id, &k.conjugate());
    for j in model.jumps() {
        gen += linalg::kron(&j.l, &j.l.conjugate()) * c(j.gamma, 0.0);
    }
    let v = (gen * c(t, 0.0)).exp() * linalg::vec_rm(rho0.matrix());
    Ok(linalg::hermitize(&linalg::unvec_rm(&v, d)))
}

/// Filter-slice master update `rho <- T rho T* + dt sum gamma L rho L*`.
pub fn sliced_master(model: &LindbladModel, rho0: &DensityOperator, dt: f64, steps: usize) -> Result<Trajectory> {
    check_step(dt)?;
    ensure_dim(model.dim(), rho0.dim())?;
    let d = model.dim();
    let tm = linalg::identity(d) + model.generator() * c(dt, 0.0);
    let mut traj = Trajectory::default();
    let mut rho = rho0.matrix().clone();
    traj.push(0.0, rho.clone())?;
    for n in 0..steps {
        let mut next = &tm * &rho * tm.adjoint();
        for j in model.jumps() {
            next += &j.l * &rho * j.l.adjoint() * c(dt * j.gamma, 0.0);
        }
        rho = linalg::hermitize(&next);
        traj.push((n + 1) as f64 * dt, rho.clone())?;
    }
    Ok(traj)
}

/// Canonical state `exp((E0 - H) / kB T) / Z`.
pub fn gibbs_state(h: &CMatrix, temperature: f64, kb: f64) -> Result<DensityOperator> {
    check_hermitian(h, "H")?;
    if !(temperature > 0.0) || !(kb > 0.0) {
        return Err(Error::contract("temperature and kB must be positive"));
    }
    let eig = linalg::eigh(h);
    let e0 = eig.min();
    let kt = kb * temperature;
    let z: f64 = eig.values.iter().map(|e| (-(e - e0) / kt).exp()).sum();
    Ok(DensityOperator::from_trusted(linalg::hermitize(&eig.map(|e| c((-(e - e0) / kt).exp() / z, 0.0)))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// Angular frequency `|E_j - E_k| / hbar`.
    pub omega: f64,
    /// `omega / 2 pi`.
    pub nu: f64,
}

/// Distinct nonzero level differences, ascending. Differences within
/// `tol` of each other (or of zero) are merged.
pub fn rydberg_ritz_lines(h: &CMatrix, hbar: f64, tol: f64) -> Result<Vec<SpectralLine>> {
    check_hermitian(h, "H")?;
    check_hbar(hbar)?;
    let e = linalg::eigh(h).values;
    let mut diffs: Vec<f64> = Vec::new();
    for j in 0..e.len() {
        for k in j + 1..e.len() {
            diffs.push((e[k] - e[j]).abs());
        }
    }
    diffs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in diffs {
        if x <= tol {
            continue;
        }
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    Ok(out
        .into_iter()
        .map(|de| {
            let omega = de / hbar;
            SpectralLine { omega, nu: omega / (2.0 * std::f64::consts::PI) }
        })
        .collect())
}

/// `A ⌊ B = (i / hbar)(AB - BA)`.
pub fn lie_product(a: &CMatrix, b: &CMatrix, hbar: f64) -> Result<CMatrix> {
    check_hbar(hbar)?;
    ensure_dim(a.nrows(), b.nrows())?;
    Ok(linalg::commutator(a, b) * (I / c(hbar, 0.0)))
}

/// `d/dt <A>` under the von Neumann equation, `<H ⌊ A>`.
pub fn ehrenfest_derivative(rho: &DensityOperator, h: &CMatrix, a: &CMatrix, hbar: f64) -> Result<C64> {
    check_hermitian(h, "H")?;
    quantum_value(rho, &lie_product(h, a, hbar)?)
}

/// Induced bracket of the linear functionals `<A>` and `<B>`: `<A ⌊ B>`.
pub fn poisson_bracket(a: &CMatrix, b: &CMatrix, rho: &DensityOperator, hbar: f64) -> Result<C64> {
    quantum_value(rho, &lie_product(a, b, hbar)?)
}

/// Error ratio `e(dt) / e(dt/2)` of a first-order method against a
/// reference final state; close to 2 in the asymptotic regime.
pub fn richardson_ratio(coarse: &CMatrix, fine: &CMatrix, reference: &CMatrix) -> f64 {
    linalg::max_norm(&(coarse - reference)) / linalg::max_norm(&(fine - reference))
}
