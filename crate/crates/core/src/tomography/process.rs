use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::superop::{is_completely_positive, project_cp, SuperOperator, DEFAULT_TOL_CP};

use super::{Reconstruction, ReconstructionReport, TomographyOptions};

/// Superoperator `M` with `M vec(rho_l) = vec(rho'_l)` in the least-squares
/// sense, `M = R' R^+`. With `opts.project` the Choi matrix is clipped to
/// the PSD cone.
pub fn process_tomography(
    inputs: &[CMatrix],
    outputs: &[CMatrix],
    opts: &TomographyOptions,
) -> Result<Reconstruction<SuperOperator>> {
    let first = inputs.first().ok_or_else(|| Error::contract("no probe states"))?;
    ensure_dim(inputs.len(), outputs.len())?;
    let d = first.nrows();
    let n = d * d;
    for (i, o) in inputs.iter().zip(outputs) {
        ensure_dim(d, i.nrows())?;
        ensure_dim(d, i.ncols())?;
        ensure_dim(d, o.nrows())?;
        ensure_dim(d, o.ncols())?;
    }
    let stack = |ms: &[CMatrix]| {
        let mut r = linalg::zeros(n, ms.len());
        for (l, m) in ms.iter().enumerate() {
            r.set_column(l, &linalg::vec_rm(m));
        }
        r
    };
    let r_in = stack(inputs);
    let r_out = stack(outputs);
    let (r_pinv, sv) = linalg::pinv(&r_in, opts.rcond)?;
    let rank = linalg::numerical_rank(&sv, opts.rcond);
    if rank < n {
        return Err(Error::NotInformationallyComplete { rank, required: n });
    }
    let mut report =
        ReconstructionReport { rank, condition_number: linalg::condition_number(&sv), ..Default::default() };
    report.check_condition();

    let raw = SuperOperator::from_matrix(d, &r_out * r_pinv)?;
    let misfit = |e: &SuperOperator| (e.matrix() * &r_in - &r_out).norm();
    report.unconstrained_residual = misfit(&raw);
    let estimate = if opts.project {
        if !is_completely_positive(&raw, DEFAULT_TOL_CP).cp {
            report.flag("projected_to_cp");
        }
        let (e, dist) = project_cp(&raw);
        report.projection_distance = dist;
        e
    } else {
        raw
    };
    report.residual = misfit(&estimate);
    Ok(Reconstruction { estimate, report })
}
