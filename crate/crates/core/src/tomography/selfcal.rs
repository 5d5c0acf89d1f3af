use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, c, CMatrix, RMatrix, RVector};
use crate::ops::hermitian_basis;
use crate::superop::SuperOperator;

use super::{Reconstruction, ReconstructionReport, DEFAULT_RCOND};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCalOptions {
    pub max_iter: usize,
    /// Stop when the residual changes by less than `rtol * max(1, ||data||)`.
    pub rtol: f64,
    /// Intensity assigned to the first source; defaults to the trace of its
    /// initial guess.
    pub source1_intensity: Option<f64>,
}

impl Default for SelfCalOptions {
    fn default() -> Self {
        SelfCalOptions { max_iter: 500, rtol: 1e-12, source1_intensity: None }
    }
}

#[derive(Debug, Clone)]
pub struct SelfCalEstimate {
    pub filters: Vec<SuperOperator>,
    /// Hermitian source estimates.
    pub sources: Vec<CMatrix>,
    /// Residual before the first and after every iteration.
    pub residual_history: Vec<f64>,
}

fn residual(outputs: &[Vec<CMatrix>], filters: &[SuperOperator], sources: &[CMatrix]) -> f64 {
    let mut sq = 0.0;
    for (row, f) in outputs.iter().zip(filters) {
        for (out, src) in row.iter().zip(sources) {
            sq += (f.matrix() * linalg::vec_rm(src) - linalg::vec_rm(out)).norm_squared();
        }
    }
    sq.sqrt()
}

/// Alternating least squares for `F_k(rho_l) = rho_kl`: with the sources
/// fixed every filter is a linear problem, and with the filters fixed every
/// source is. Sources stay Hermitian. After each sweep the scale freedom
/// `(F, rho) -> (F / s, s rho)` is fixed on the trace of the first source.
/// The residual never increases; the best iterate is returned.
pub fn self_calibrating_tomography(
    outputs: &[Vec<CMatrix>],
    filters: Vec<SuperOperator>,
    sources: Vec<CMatrix>,
    opts: &SelfCalOptions,
) -> Result<Reconstruction<SelfCalEstimate>> {
    if filters.len() < 2 || sources.len() < 2 {
        return Err(Error::contract("self-calibration needs at least two filters and two sources"));
    }
    ensure_dim(filters.len(), outputs.len())?;
    let d = sources[0].nrows();
    let n = d * d;
    for f in &filters {
        ensure_dim(d, f.dim())?;
    }
    for s in &sources {
        ensure_dim(d, s.nrows())?;
        if linalg::hermitian_defect(s) > 1e-10 {
            return Err(Error::contract("initial source guess is not Hermitian"));
        }
    }
    for row in outputs {
        ensure_dim(sources.len(), row.len())?;
        for o in row {
            ensure_dim(d, o.nrows())?;
        }
    }
    let intensity = opts.source1_intensity.unwrap_or_else(|| linalg::trace(&sources[0]).re);
    let data_norm = outputs.iter().flatten().map(|o| o.norm_squared()).sum::<f64>().sqrt();
    let scale = data_norm.max(1.0);
    let basis = hermitian_basis(d)?;

    let mut filters = filters;
    let mut sources: Vec<CMatrix> = sources.iter().map(linalg::hermitize).collect();
    let mut report = ReconstructionReport::default();
    let mut history = vec![residual(outputs, &filters, &sources)];
    let mut best = (history[0], filters.clone(), sources.clone());
    let mut converged = history[0] <= opts.rtol * scale;

    while !converged && report.iterations < opts.max_iter {
        report.iterations += 1;

        let mut r = linalg::zeros(n, sources.len());
        for (l, s) in sources.iter().enumerate() {
            r.set_column(l, &linalg::vec_rm(s));
        }
        let (r_pinv, _) = linalg::pinv(&r, DEFAULT_RCOND)?;
        for (f, row) in filters.iter_mut().zip(outputs) {
            let mut p = linalg::zeros(n, row.len());
            for (l, o) in row.iter().enumerate() {
                p.set_column(l, &linalg::vec_rm(o));
            }
            *f = SuperOperator::from_matrix(d, p * &r_pinv)?;
        }

        // real design: [Re; Im] of M_k vec(B_m), stacked over k
        let rows = 2 * n * filters.len();
        let mut a = RMatrix::zeros(rows, n);
        for (m, b) in basis.elements().iter().enumerate() {
            let vb = linalg::vec_rm(b);
            for (k, f) in filters.iter().enumerate() {
                let col = f.matrix() * &vb;
                for i in 0..n {
                    a[(2 * n * k + i, m)] = col[i].re;
                    a[(2 * n * k + n + i, m)] = col[i].im;
                }
            }
        }
        for (l, s) in sources.iter_mut().enumerate() {
            let mut b = RVector::zeros(rows);
            for (k, row) in outputs.iter().enumerate() {
                let v = linalg::vec_rm(&row[l]);
                for i in 0..n {
                    b[2 * n * k + i] = v[i].re;
                    b[2 * n * k + n + i] = v[i].im;
                }
            }
            let sol = linalg::lstsq_real(&a, &b, DEFAULT_RCOND)?;
            report.condition_number = linalg::condition_number(&sol.singular_values);
            *s = basis.resum(&sol.x.iter().copied().collect::<Vec<_>>())?;
        }

        let t = linalg::trace(&sources[0]).re;
        if t > 0.0 && intensity > 0.0 {
            let g = intensity / t;
            for s in &mut sources {
                *s *= c(g, 0.0);
            }
            for f in &mut filters {
                *f = SuperOperator::from_matrix(d, f.matrix() * c(1.0 / g, 0.0))?;
            }
        } else {
            report.flag("gauge_unfixed");
        }

        let res = residual(outputs, &filters, &sources);
        let prev = *history.last().unwrap();
        history.push(res);
        if res < best.0 {
            best = (res, filters.clone(), sources.clone());
        }
        converged = res <= opts.rtol * scale || (prev - res).abs() <= opts.rtol * scale;
    }

    if !converged {
        report.flag("not_converged");
    }
    let (res, filters, sources) = best;
    report.residual = res;
    report.unconstrained_residual = res;
    if res > 1e-8 * scale {
        report.flag("positive_residual");
    }
    report.check_condition();
    Ok(Reconstruction { estimate: SelfCalEstimate { filters, sources, residual_history: history }, report })
}
