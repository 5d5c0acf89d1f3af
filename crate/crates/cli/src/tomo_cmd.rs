use std::path::{Path, PathBuf};

use qtomo::io::{
    matrix_from_json, matrix_to_json, ChannelFile, JointFile, JsonMatrix, MatrixFile, MeasureFile, RatesFile,
};
use qtomo::linalg::CMatrix;
use qtomo::ops::DensityOperator;
use qtomo::simulator::{empirical_rates, CoincidenceLog, EventLog, Rates};
use qtomo::superop::{choi_transform, kraus_from_choi, SuperOperator, DEFAULT_TOL_CP};
use qtomo::tomography::{
    detector_tomography, instrument_tomography, process_tomography, self_calibrating_tomography, state_tomography,
    CoincidenceData, DetectorData, InstrumentProbe, ReconstructionReport, SelfCalOptions, StateObservation,
    TomographyOptions,
};
use qtomo::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::context::Context;
use crate::TomoKind;

pub fn run(ctx: &mut Context, kind: TomoKind, dir: &Path, out: &Path, project: bool, max_iter: usize) -> Result<()> {
    let mut opts = TomographyOptions { project, ..TomographyOptions::default() };
    if let Some(r) = ctx.rtol {
        opts.rcond = r;
    }
    ctx.param("bundle", dir.display().to_string());
    ctx.param("project", project);
    let (estimate, report) = match kind {
        TomoKind::State => state(ctx, dir, &opts)?,
        TomoKind::Detector => detector(ctx, dir, &opts)?,
        TomoKind::Process => process(ctx, dir, &opts)?,
        TomoKind::Instrument => instrument(ctx, dir, &opts)?,
        TomoKind::Selfcal => {
            ctx.param("max_iter", max_iter);
            selfcal(ctx, dir, max_iter)?
        }
    };
    let kind = crate::kind_name(&kind);
    let full = json!({
        "kind": kind,
        "estimate": estimate,
        "residual": report.residual,
        "condition_number": report.condition_number,
        "flags": report.flags,
        "report": report,
    });
    ctx.write_json(out, &full)?;
    ctx.set_summary(&json!({
        "command": format!("tomo {kind}"),
        "residual": report.residual,
        "condition_number": report.condition_number,
        "rank": report.rank,
        "flags": report.flags,
    }))
}

type Outcome = (Value, ReconstructionReport);

fn missing(what: &str, path: &Path) -> Error {
    Error::Parse(format!("missing {what}: {}", path.display()))
}

/// `*.<ext>` files of `dir`, sorted by name.
fn listing(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|_| missing("directory", dir))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(missing(&format!("*.{ext} files"), dir));
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_probes(ctx: &mut Context, dir: &Path) -> Result<Vec<(String, DensityOperator)>> {
    listing(&dir.join("probes"), "json")?
        .iter()
        .map(|p| {
            let f: MatrixFile = ctx.read_json(p)?;
            Ok((stem(p), f.to_density(ctx.tol)?))
        })
        .collect()
}

fn read_event_log(ctx: &mut Context, path: &Path) -> Result<EventLog> {
    EventLog::read_csv(ctx.open(path)?)
}

/// Rates for one data set: `events/<name>.csv` if present, else
/// `rates/<name>.json`.
fn read_rates(ctx: &mut Context, dir: &Path, name: &str) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let csv = dir.join("events").join(format!("{name}.csv"));
    let json = dir.join("rates").join(format!("{name}.json"));
    if csv.is_file() {
        let r = empirical_rates(&read_event_log(ctx, &csv)?)?;
        Ok((r.p_hat, Some(r.stderr)))
    } else if json.is_file() {
        let f: RatesFile = ctx.read_json(&json)?;
        Ok((f.p_hat, f.stderr))
    } else {
        Err(missing("events file", &csv))
    }
}

fn density_json(m: &CMatrix) -> Value {
    json!(MatrixFile::from_matrix(m))
}

fn superop_json(e: &SuperOperator) -> Value {
    let choi = choi_transform(e);
    let kraus = kraus_from_choi(&choi, DEFAULT_TOL_CP).ok().map(|k| ChannelFile::from_kraus(&k).kraus);
    json!({
        "superop": matrix_to_json(e.matrix()),
        "choi": matrix_to_json(choi.matrix()),
        "choi_rank": choi.rank(DEFAULT_TOL_CP),
        "kraus": kraus.flatten(),
    })
}

/// `measure.json` with event logs in `events/` (counts summed) or a single
/// `rates.json`.
fn state(ctx: &mut Context, dir: &Path, opts: &TomographyOptions) -> Result<Outcome> {
    let mf: MeasureFile = ctx.read_json(&dir.join("measure.json"))?;
    let measure = mf.to_measure()?;
    let events = dir.join("events");
    let obs = if events.is_dir() {
        let mut total: Vec<u64> = Vec::new();
        for p in listing(&events, "csv")? {
            let counts = read_event_log(ctx, &p)?.counts();
            if total.is_empty() {
                total = counts;
            } else if total.len() == counts.len() {
                total.iter_mut().zip(&counts).for_each(|(t, c)| *t += c);
            } else {
                return Err(Error::DimensionMismatch { expected: total.len(), actual: counts.len() });
            }
        }
        StateObservation::from_rates(measure, &Rates::from_counts(&total)?)?
    } else {
        let rates = dir.join("rates.json");
        if !rates.is_file() {
            return Err(missing("events directory or rates.json", dir));
        }
        let f: RatesFile = ctx.read_json(&rates)?;
        StateObservation::new(measure, f.p_hat, f.stderr)?
    };
    let rec = state_tomography(&[obs], opts)?;
    Ok((density_json(rec.estimate.matrix()), rec.report))
}

/// `probes/<name>.json` states with `events/<name>.csv` or
/// `rates/<name>.json` statistics.
fn detector(ctx: &mut Context, dir: &Path, opts: &TomographyOptions) -> Result<Outcome> {
    let probes = read_probes(ctx, dir)?;
    let mut rates = Vec::new();
    let mut stderr = Some(Vec::new());
    for (name, _) in &probes {
        let (p, s) = read_rates(ctx, dir, name)?;
        rates.push(p);
        stderr = match (stderr, s) {
            (Some(mut all), Some(s)) => {
                all.push(s);
                Some(all)
            }
            _ => None,
        };
    }
    let data = DetectorData { probes: probes.into_iter().map(|(_, p)| p).collect(), rates, stderr };
    let rec = detector_tomography(&data, opts)?;
    Ok((json!(MeasureFile::from_measure(&rec.estimate)), rec.report))
}

/// `probes/<name>.json` inputs and `outputs/<name>.json` unnormalized
/// output operators.
fn process(ctx: &mut Context, dir: &Path, opts: &TomographyOptions) -> Result<Outcome> {
    let probes = read_probes(ctx, dir)?;
    let mut outputs = Vec::new();
    for (name, _) in &probes {
        let path = dir.join("outputs").join(format!("{name}.json"));
        if !path.is_file() {
            return Err(missing("output file", &path));
        }
        let f: MatrixFile = ctx.read_json(&path)?;
        outputs.push(f.to_matrix()?);
    }
    let inputs: Vec<CMatrix> = probes.into_iter().map(|(_, p)| p.into_matrix()).collect();
    let rec = process_tomography(&inputs, &outputs, opts)?;
    Ok((superop_json(&rec.estimate), rec.report))
}

/// `detector.json`, `probes/<name>.json`, and `events/<name>.csv`
/// coincidence logs or `joint/<name>.json` exact tables.
fn instrument(ctx: &mut Context, dir: &Path, opts: &TomographyOptions) -> Result<Outcome> {
    let mf: MeasureFile = ctx.read_json(&dir.join("detector.json"))?;
    let detector = mf.to_measure()?;
    let mut probes = Vec::new();
    for (name, state) in read_probes(ctx, dir)? {
        let csv = dir.join("events").join(format!("{name}.csv"));
        let joint = dir.join("joint").join(format!("{name}.json"));
        let data = if csv.is_file() {
            CoincidenceData::from_log(&CoincidenceLog::read_csv(ctx.open(&csv)?)?)?
        } else if joint.is_file() {
            let f: JointFile = ctx.read_json(&joint)?;
            CoincidenceData::Exact(f.joint)
        } else {
            return Err(missing("events file", &csv));
        };
        probes.push(InstrumentProbe { state, data });
    }
    let rec = instrument_tomography(&probes, &detector, opts)?;
    let est = &rec.estimate;
    let value = json!({
        "branches": est.branches.iter().map(superop_json).collect::<Vec<_>>(),
        "observed_rates": est.observed_rates,
        "observed_stderr": est.observed_stderr,
        "predicted_rates": est.predicted_rates,
    });
    Ok((value, rec.report))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputsFile {
    /// `outputs[k][l]`: filter `k` applied to source `l`.
    outputs: Vec<Vec<JsonMatrix>>,
}

/// Initial guesses `filters/*.json` and `sources/*.json` with the measured
/// outputs in `outputs.json`.
fn selfcal(ctx: &mut Context, dir: &Path, max_iter: usize) -> Result<Outcome> {
    let mut filters = Vec::new();
    for p in listing(&dir.join("filters"), "json")? {
        let f: ChannelFile = ctx.read_json(&p)?;
        filters.push(f.to_superop()?);
    }
    let mut sources = Vec::new();
    for p in listing(&dir.join("sources"), "json")? {
        let f: MatrixFile = ctx.read_json(&p)?;
        sources.push(f.to_matrix()?);
    }
    let f: OutputsFile = ctx.read_json(&dir.join("outputs.json"))?;
    let outputs = f
        .outputs
        .iter()
        .map(|row| row.iter().map(matrix_from_json).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut opts = SelfCalOptions { max_iter, ..SelfCalOptions::default() };
    if let Some(r) = ctx.rtol {
        opts.rtol = r;
    }
    let rec = self_calibrating_tomography(&outputs, filters, sources, &opts)?;
    let est = &rec.estimate;
    let value = json!({
        "filters": est.filters.iter().map(|f| matrix_to_json(f.matrix())).collect::<Vec<_>>(),
        "sources": est.sources.iter().map(density_json).collect::<Vec<_>>(),
        "residual_history": est.residual_history,
    });
    Ok((value, rec.report))
}
