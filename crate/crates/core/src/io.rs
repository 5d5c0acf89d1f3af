//! JSON file formats and the canonical JSON writer.
//!
//! A complex scalar is `[re, im]`; a matrix is a row-major array of rows.
//! Canonical output has sorted keys and every float written with 17
//! significant digits, so write -> read -> write is byte-stable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{GeneratorModel, JumpOperator, LindbladModel, Trajectory};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{c, CMatrix, C64};
use crate::measures::{Detector, QuantumMeasure, Scale};
use crate::ops::{DensityOperator, Tolerances};
use crate::optics::OpticalNetwork;
use crate::simulator::Instrument;
use crate::superop::{kraus_from_choi, superop_from_kraus, ChoiMatrix, KrausSet, SuperOperator, DEFAULT_TOL_CP};
use crate::uncertainty::QuantityVector;

pub type JsonComplex = [f64; 2];
pub type JsonMatrix = Vec<Vec<JsonComplex>>;

pub fn complex_to_json(z: C64) -> JsonComplex {
    [z.re, z.im]
}

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()).collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Parse("matrix rows have unequal lengths".into()));
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Parse("matrix entry is not finite".into()));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

fn square_from_json(rows: &JsonMatrix, dim: usize) -> Result<CMatrix> {
    let m = matrix_from_json(rows)?;
    ensure_dim(dim, m.nrows())?;
    ensure_dim(dim, m.ncols())?;
    Ok(m)
}

/// Operator or density file `{ "dim": d, "matrix": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dim: usize,
    pub matrix: JsonMatrix,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixFile { dim: m.nrows(), matrix: matrix_to_json(m) }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        square_from_json(&self.matrix, self.dim)
    }

    pub fn to_density(&self, tol: Tolerances) -> Result<DensityOperator> {
        DensityOperator::with_tolerances(self.to_matrix()?, tol)
    }
}

/// Measure file. `elements` are the labelled elements `1..=K`; `null` is
/// the optional null element. `scale` lists one value vector per element,
/// the null element's first when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureFile {
    pub dim: usize,
    pub elements: Vec<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<Vec<JsonComplex>>>,
}

impl MeasureFile {
    pub fn from_measure(m: &QuantumMeasure) -> Self {
        MeasureFile {
            dim: m.dim(),
            elements: m.labeled_elements().iter().map(matrix_to_json).collect(),
            null: m.null_element().map(matrix_to_json),
            scale: None,
        }
    }

    pub fn from_detector(det: &Detector) -> Self {
        let mut f = Self::from_measure(det.measure());
        f.scale = Some(det.scale().values().iter().map(|v| v.iter().map(|&z| complex_to_json(z)).collect()).collect());
        f
    }

    pub fn to_measure(&self) -> Result<QuantumMeasure> {
        let elements = self.elements.iter().map(|e| square_from_json(e, self.dim)).collect::<Result<Vec<_>>>()?;
        match &self.null {
            Some(n) => QuantumMeasure::with_null(square_from_json(n, self.dim)?, elements),
            None => QuantumMeasure::new(elements),
        }
    }

    pub fn to_detector(&self) -> Result<Detector> {
        let scale = self.scale.as_ref().ok_or_else(|| Error::Parse("measure file has no scale".into()))?;
        let values = scale.iter().map(|v| v.iter().map(|z| c(z[0], z[1])).collect()).collect();
        Detector::new(self.to_measure()?, Scale::new(values)?)
    }
}

/// Optical network `{ "split": [left, right] }` or `{ "leaf": { "jones": M } }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkFile {
    Split(Box<[NetworkFile; 2]>),
    Leaf { jones: JsonMatrix },
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<OpticalNetwork> {
        match self {
            NetworkFile::Leaf { jones } => OpticalNetwork::leaf(square_from_json(jones, 2)?),
            NetworkFile::Split(children) => {
                Ok(OpticalNetwork::split(children[0].to_network()?, children[1].to_network()?))
            }
        }
    }
}

/// Channel file with either Kraus operators or a Choi matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<JsonMatrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<JsonMatrix>,
}

impl ChannelFile {
    pub fn from_kraus(k: &KrausSet) -> Self {
        ChannelFile { dim: k.dim(), kraus: Some(k.operators().iter().map(matrix_to_json).collect()), choi: None }
    }

    pub fn to_kraus(&self) -> Result<KrausSet> {
        match (&self.kraus, &self.choi) {
            (Some(ops), None) => {
                KrausSet::new(ops.iter().map(|m| square_from_json(m, self.dim)).collect::<Result<_>>()?)
            }
            (None, Some(ch)) => {
                let m = square_from_json(ch, self.dim * self.dim)?;
                kraus_from_choi(&ChoiMatrix::from_matrix(self.dim, m)?, DEFAULT_TOL_CP)
            }
            _ => Err(Error::Parse("channel file needs exactly one of `kraus` or `choi`".into())),
        }
    }

    pub fn to_superop(&self) -> Result<SuperOperator> {
        self.to_kraus().map(|k| superop_from_kraus(&k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentFile {
    pub branches: Vec<ChannelFile>,
}

impl InstrumentFile {
    pub fn to_instrument(&self) -> Result<Instrument> {
        Instrument::new(self.branches.iter().map(ChannelFile::to_kraus).collect::<Result<_>>()?)
    }
}

/// Device probed by `simulate`: a measure, or an instrument followed by a
/// second detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceFile {
    Coincidence { instrument: InstrumentFile, detector: MeasureFile },
    Measure(MeasureFile),
}

/// Quantity vector `{ "components": [M...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantityFile {
    pub components: Vec<JsonMatrix>,
}

impl QuantityFile {
    pub fn to_quantity(&self) -> Result<QuantityVector> {
        QuantityVector::new(self.components.iter().map(matrix_from_json).collect::<Result<_>>()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladFile {
    #[serde(rename = "L")]
    pub l: Vec<JsonMatrix>,
    pub gamma: Vec<f64>,
}

/// Dynamics model `{ "H", "V"?, "lindblad"?: { "L", "gamma" }, "rho0", "hbar"? }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "H")]
    pub h: JsonMatrix,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<JsonMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladFile>,
    pub rho0: JsonMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar: Option<f64>,
}

pub enum Model {
    Generator(GeneratorModel),
    Lindblad(LindbladModel),
}

impl ModelFile {
    pub fn hbar(&self) -> f64 {
        self.hbar.unwrap_or(1.0)
    }

    pub fn to_model(&self) -> Result<Model> {
        let h = matrix_from_json(&self.h)?;
        let d = h.nrows();
        match (&self.lindblad, &self.v) {
            (Some(_), Some(_)) => Err(Error::Parse("model may have `V` or `lindblad`, not both".into())),
            (Some(l), None) => {
                ensure_dim(l.l.len(), l.gamma.len())?;
                let jumps =
                    l.l.iter()
                        .zip(&l.gamma)
                        .map(|(m, &gamma)| Ok(JumpOperator { l: square_from_json(m, d)?, gamma }))
                        .collect::<Result<_>>()?;
                Ok(Model::Lindblad(LindbladModel::new(h, jumps, self.hbar())?))
            }
            (None, v) => {
                let v = v.as_ref().map(|m| square_from_json(m, d)).transpose()?;
                Ok(Model::Generator(GeneratorModel::new(h, v, self.hbar())?))
            }
        }
    }

    pub fn initial_state(&self, tol: Tolerances) -> Result<DensityOperator> {
        DensityOperator::with_tolerances(matrix_from_json(&self.rho0)?, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub t: f64,
    pub matrix: JsonMatrix,
}

pub fn trajectory_to_json(traj: &Trajectory) -> Vec<Snapshot> {
    traj.iter().map(|(t, m)| Snapshot { t, matrix: matrix_to_json(m) }).collect()
}

pub fn trajectory_from_json(snaps: &[Snapshot]) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    for s in snaps {
        traj.push(s.t, matrix_from_json(&s.matrix)?)?;
    }
    Ok(traj)
}

/// Rate vector indexed by label `0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesFile {
    pub p_hat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
}

/// Exact joint table `p(j, k)` for one instrument probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointFile {
    pub joint: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Counts {
    Single(Vec<u64>),
    Joint(Vec<Vec<u64>>),
}

/// Counts written next to an event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub generator: String,
    pub seed: u64,
    pub shots: u64,
    pub counts: Counts,
}

struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

/// Canonical JSON text (sorted keys, 17 significant digits) with a
/// trailing newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    // Value maps are ordered by key
    let value = serde_json::to_value(v)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
