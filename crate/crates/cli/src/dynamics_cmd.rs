use std::path::Path;

use qtomo::dynamics::{
    lindblad_evolve, lindblad_exact, liouville_evolve, richardson_ratio, slice_evolution, sliced_master, LindbladModel,
    Trajectory,
};
use qtomo::io::{trajectory_to_json, Model, ModelFile};
use qtomo::linalg::CMatrix;
use qtomo::ops::DensityOperator;
use qtomo::{Error, Result};
use serde_json::{json, Value};

use crate::context::Context;
use crate::Method;

pub fn run(ctx: &mut Context, model: &Path, t: f64, dt: f64, method: Method, out: &Path) -> Result<()> {
    let method_name = crate::kind_name(&method);
    ctx.param("method", &method_name);
    ctx.param("t", t);
    ctx.param("dt", dt);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Contract(format!("time step must be positive, got {dt}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Contract(format!("final time must be nonnegative, got {t}")));
    }
    let file: ModelFile = ctx.read_json(model)?;
    let model = file.to_model()?;
    let rho0 = file.initial_state(ctx.tol)?;

    // uniform grid 0, h, .., t with h as close to dt as divides t
    let steps = (t / dt).round() as usize;
    let h = if steps == 0 { dt } else { t / steps as f64 };
    let traj = match method {
        Method::Slice => slice(&model, &rho0, h, steps)?,
        Method::Exact => exact_grid(&model, &rho0, h, steps)?,
        Method::Lindblad => {
            let lm = as_lindblad(&model)?;
            lindblad_evolve(&lm, &rho0, t, h)?
        }
    };

    let richardson = if method == Method::Slice && steps > 0 {
        let fine = slice(&model, &rho0, h / 2.0, 2 * steps)?;
        let reference = exact_at(&model, &rho0, t)?;
        let coarse_end = traj.last().map(|(_, s)| s.clone()).unwrap_or_else(|| reference.clone());
        let fine_end = fine.last().map(|(_, s)| s.clone()).unwrap_or_else(|| reference.clone());
        json!({
            "dt": h,
            "error_dt": qtomo::linalg::max_norm(&(&coarse_end - &reference)),
            "error_half_dt": qtomo::linalg::max_norm(&(&fine_end - &reference)),
            "ratio": richardson_ratio(&coarse_end, &fine_end, &reference),
        })
    } else {
        Value::Null
    };

    let doc = json!({
        "method": method_name,
        "t": t,
        "dt": h,
        "steps": steps,
        "snapshots": trajectory_to_json(&traj),
        "richardson": richardson,
    });
    ctx.write_json(out, &doc)?;
    ctx.set_summary(&json!({
        "command": "dynamics",
        "method": method_name,
        "snapshots": traj.len(),
        "richardson": richardson,
    }))
}

fn as_lindblad(model: &Model) -> Result<LindbladModel> {
    match model {
        Model::Lindblad(m) => Ok(m.clone()),
        Model::Generator(g) => {
            if g.potential().iter().any(|z| z.norm() > 0.0) {
                return Err(Error::Contract("lindblad method needs a model without V".into()));
            }
            LindbladModel::new(g.hamiltonian().clone(), Vec::new(), g.hbar())
        }
    }
}

fn slice(model: &Model, rho0: &DensityOperator, h: f64, steps: usize) -> Result<Trajectory> {
    match model {
        Model::Generator(g) => slice_evolution(&g.generator(), rho0.matrix(), h, steps),
        Model::Lindblad(m) => sliced_master(m, rho0, h, steps),
    }
}

fn exact_at(model: &Model, rho0: &DensityOperator, t: f64) -> Result<CMatrix> {
    match model {
        Model::Generator(g) => liouville_evolve(&g.generator(), rho0.matrix(), t),
        Model::Lindblad(m) => lindblad_exact(m, rho0, t),
    }
}

fn exact_grid(model: &Model, rho0: &DensityOperator, h: f64, steps: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    for n in 0..=steps {
        let tn = n as f64 * h;
        traj.push(tn, exact_at(model, rho0, tn)?)?;
    }
    Ok(traj)
}
