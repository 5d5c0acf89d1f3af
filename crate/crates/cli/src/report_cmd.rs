use std::fmt::Write as _;
use std::path::Path;

use qtomo::dynamics::rydberg_ritz_lines;
use qtomo::io::{ChannelFile, MatrixFile, MeasureFile, QuantityFile};
use qtomo::linalg::eigh;
use qtomo::measures::{is_projective, measured_quantity, response_probabilities, DEFAULT_TOL_MEASURE};
use qtomo::superop::{classify, is_completely_positive, pi_operator, superop_from_kraus, DEFAULT_TOL_CP};
use qtomo::uncertainty::{measurement_uncertainty, q_uncertainty, statistical_vs_quantum, QuantityVector};
use qtomo::{Error, Result};
use serde_json::{json, Value};

use crate::context::Context;
use crate::ReportKind;

const LINE_TOL: f64 = 1e-9;

pub struct Inputs<'a> {
    pub state: Option<&'a Path>,
    pub detector: Option<&'a Path>,
    pub quantity: Option<&'a Path>,
    pub hamiltonian: Option<&'a Path>,
    pub hbar: f64,
    pub channel: Option<&'a Path>,
    pub plot: Option<&'a Path>,
}

fn required<'a>(p: Option<&'a Path>, flag: &str) -> Result<&'a Path> {
    p.ok_or_else(|| Error::Contract(format!("report needs --{flag}")))
}

/// Plain `x,y` CSV.
fn plot_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("x,y\n");
    for (x, y) in points {
        let _ = writeln!(s, "{x:.16e},{y:.16e}");
    }
    s
}

pub fn run(ctx: &mut Context, kind: ReportKind, inputs: &Inputs, out: &Path) -> Result<()> {
    let (report, plot) = match kind {
        ReportKind::Uncertainty => uncertainty(ctx, inputs)?,
        ReportKind::Lines => lines(ctx, inputs)?,
        ReportKind::Classify => classification(ctx, inputs)?,
    };
    ctx.write_json(out, &report)?;
    if let Some(p) = inputs.plot {
        ctx.write(p, plot_csv(&plot).as_bytes())?;
    }
    ctx.set_summary(&report)
}

/// Spread of the results against the quantum uncertainty of the measured
/// quantity, plus the measurement uncertainty of `--quantity` if given.
/// The plot is the outcome distribution over the first scale component.
fn uncertainty(ctx: &mut Context, inputs: &Inputs) -> Result<(Value, Vec<(f64, f64)>)> {
    let sf: MatrixFile = ctx.read_json(required(inputs.state, "state")?)?;
    let rho = sf.to_density(ctx.tol)?;
    let df: MeasureFile = ctx.read_json(required(inputs.detector, "detector")?)?;
    let det = df.to_detector()?;

    let spread = statistical_vs_quantum(&det, &rho)?;
    let (projective, projector_defect) = is_projective(det.measure(), DEFAULT_TOL_MEASURE);
    let a = QuantityVector::new(measured_quantity(&det))?;
    let mut report = json!({
        "kind": "uncertainty",
        "projective": projective,
        "projector_defect": projector_defect,
        "spread": spread,
        "measured_quantity": q_uncertainty(&rho, &a)?,
    });
    if let Some(q) = inputs.quantity {
        let qf: QuantityFile = ctx.read_json(q)?;
        let x = qf.to_quantity()?;
        report["quantity"] = json!(q_uncertainty(&rho, &x)?);
        report["measurement"] = json!(measurement_uncertainty(&det, &rho, &x)?);
    }
    let p = response_probabilities(det.measure(), &rho)?;
    let plot = det.scale().values().iter().zip(&p).map(|(v, &pk)| (v[0].re, pk)).collect();
    Ok((report, plot))
}

/// Line table of a Hamiltonian; the plot pairs angular frequency and
/// frequency.
fn lines(ctx: &mut Context, inputs: &Inputs) -> Result<(Value, Vec<(f64, f64)>)> {
    let hf: MatrixFile = ctx.read_json(required(inputs.hamiltonian, "hamiltonian")?)?;
    let h = hf.to_matrix()?;
    let tol = ctx.rtol.unwrap_or(LINE_TOL);
    ctx.param("hbar", inputs.hbar);
    let lines = rydberg_ritz_lines(&h, inputs.hbar, tol)?;
    let levels = eigh(&h).values;
    let plot = lines.iter().map(|l| (l.omega, l.nu)).collect();
    Ok((json!({ "kind": "lines", "hbar": inputs.hbar, "levels": levels, "lines": lines }), plot))
}

/// Filter classification of a channel; the plot lists the eigenvalues of
/// `sum T* T` against their index.
fn classification(ctx: &mut Context, inputs: &Inputs) -> Result<(Value, Vec<(f64, f64)>)> {
    let cf: ChannelFile = ctx.read_json(required(inputs.channel, "channel")?)?;
    let k = cf.to_kraus()?;
    let tol = ctx.rtol.unwrap_or(DEFAULT_TOL_CP);
    let class = classify(&k, tol);
    let cp = is_completely_positive(&superop_from_kraus(&k), tol);
    let pi_eigs = eigh(&pi_operator(&k)).values;
    let plot = pi_eigs.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect();
    let report = json!({
        "kind": "classify",
        "classification": class,
        "min_choi_eigenvalue": cp.min_choi_eigenvalue,
        "pi_eigenvalues": pi_eigs,
    });
    Ok((report, plot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_is_plain_two_column_csv() {
        assert_eq!(plot_csv(&[]), "x,y\n");
        let s = plot_csv(&[(1.0, 0.5), (-2.0, 0.25)]);
        let rows: Vec<&str> = s.lines().collect();
        assert_eq!(rows.len(), 3);
        let back: Vec<f64> = rows[2].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(back, vec![-2.0, 0.25]);
    }
}
