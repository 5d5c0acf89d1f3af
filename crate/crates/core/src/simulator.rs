//! Seeded detection-event generation.
//!
//! Shots are drawn by inverse-CDF sampling from the response probabilities.
//! Random numbers come from ChaCha20 (a counter-based generator). The shot
//! sequence is cut into chunks of [`CHUNK_SHOTS`] shots; chunk `i` uses the
//! generator seeded with the run seed and switched to stream `i`. Chunks are
//! independent, so they may be drawn in parallel and the log is identical
//! to the sequential one.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::measures::{response_probabilities, QuantumMeasure};
use crate::ops::DensityOperator;
use crate::superop::{superop_from_kraus, KrausSet, SuperOperator};

/// Algorithm identity recorded in every log header.
pub const GENERATOR_ID: &str = "chacha20-stream-chunk65536-v1";
pub const CHUNK_SHOTS: usize = 1 << 16;
/// Tolerance on `sum p = 1` and on negative probabilities.
pub const PROBABILITY_TOL: f64 = 1e-9;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Clip tiny negative probabilities and renormalize; reject anything
/// farther than `tol` from a probability vector.
pub fn sanitize_probabilities(p: &[f64], tol: f64) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::contract("empty probability vector"));
    }
    if let Some(&bad) = p.iter().find(|&&x| !(x >= -tol) || !x.is_finite()) {
        return Err(Error::contract(format!("probability {bad} is negative beyond tolerance")));
    }
    let total: f64 = p.iter().map(|x| x.max(0.0)).sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::contract(format!("probabilities sum to {total}, not 1")));
    }
    Ok(p.iter().map(|x| x.max(0.0) / total).collect())
}

/// Cumulative distribution whose entries from the last nonzero category on
/// are exactly 1, so trailing zero-probability categories are never drawn.
fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = p.iter().rposition(|&x| x > 0.0) {
        for v in &mut cdf[last..] {
            *v = 1.0;
        }
    }
    cdf
}

/// Draw `shots` category indices from probability vector `p`.
pub fn sample_categorical(p: &[f64], shots: usize, seed: u64) -> Result<Vec<u32>> {
    let p = sanitize_probabilities(p, PROBABILITY_TOL)?;
    let cdf = cumulative(&p);
    let mut out = vec![0u32; shots];
    out.par_chunks_mut(CHUNK_SHOTS).enumerate().for_each(|(chunk, slot)| {
        let mut rng = chunk_rng(seed, chunk);
        for s in slot.iter_mut() {
            let u: f64 = rng.random();
            *s = cdf.partition_point(|&c| c <= u) as u32;
        }
    });
    Ok(out)
}

/// Seeded record of single-detector events; shot index is the position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    pub seed: u64,
    pub generator: String,
    /// Number of distinct labels `K + 1` (label 0 is the null detection).
    pub num_labels: usize,
    labels: Vec<u32>,
}

impl EventLog {
    pub fn new(seed: u64, generator: String, num_labels: usize, labels: Vec<u32>) -> Result<Self> {
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= num_labels) {
            return Err(Error::contract(format!("label {l} out of range 0..{num_labels}")));
        }
        Ok(EventLog { seed, generator, num_labels, labels })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.labels.iter().copied().enumerate()
    }

    /// Counts indexed by label.
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_labels];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# generator={}", self.generator)?;
        writeln!(w, "# labels={}", self.num_labels)?;
        writeln!(w, "shot,label")?;
        for (shot, label) in self.records() {
            writeln!(w, "{shot},{label}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_log_rows(r, 2)?;
        let seed = header.get_u64("seed")?;
        let num_labels = header.get_u64("labels")? as usize;
        let labels = rows.into_iter().map(|row| row[0]).collect();
        EventLog::new(seed, header.get_str("generator")?, num_labels, labels)
    }
}

/// Seeded record of instrument/detector coincidences `(j, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceLog {
    pub seed: u64,
    pub generator: String,
    /// `J + 1` instrument labels (0 = no instrument response).
    pub num_branches: usize,
    /// `K + 1` detector labels (0 = null detection).
    pub num_outcomes: usize,
    pairs: Vec<(u32, u32)>,
}

impl CoincidenceLog {
    pub fn new(
        seed: u64,
        generator: String,
        num_branches: usize,
        num_outcomes: usize,
        pairs: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if let Some(&(j, k)) = pairs.iter().find(|&&(j, k)| j as usize >= num_branches || k as usize >= num_outcomes) {
            return Err(Error::contract(format!("coincidence ({j},{k}) out of range")));
        }
        Ok(CoincidenceLog { seed, generator, num_branches, num_outcomes, pairs })
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        self.pairs.iter().enumerate().map(|(s, &(j, k))| (s, j, k))
    }

    /// Joint counts `n[j][k]`.
    pub fn counts(&self) -> Vec<Vec<u64>> {
        let mut counts = vec![vec![0u64; self.num_outcomes]; self.num_branches];
        for &(j, k) in &self.pairs {
            counts[j as usize][k as usize] += 1;
        }
        counts
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# generator={}", self.generator)?;
        writeln!(w, "# branches={}", self.num_branches)?;
        writeln!(w, "# labels={}", self.num_outcomes)?;
        writeln!(w, "shot,j,k")?;
        for (shot, j, k) in self.records() {
            writeln!(w, "{shot},{j},{k}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_log_rows(r, 3)?;
        let pairs = rows.into_iter().map(|row| (row[0], row[1])).collect();
        CoincidenceLog::new(
            header.get_u64("seed")?,
            header.get_str("generator")?,
            header.get_u64("branches")? as usize,
            header.get_u64("labels")? as usize,
            pairs,
        )
    }
}

struct LogHeader(Vec<(String, String)>);

impl LogHeader {
    fn get_str(&self, key: &str) -> Result<String> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| Error::Parse(format!("log header is missing `{key}`")))
    }

    fn get_u64(&self, key: &str) -> Result<u64> {
        let v = self.get_str(key)?;
        v.parse().map_err(|_| Error::Parse(format!("header `{key}` is not an integer: {v}")))
    }
}

/// Parse `# key=value` lines, the column header, and rows of `columns`
/// integers whose first column must equal the row index. Returns the
/// remaining columns.
fn read_log_rows<R: BufRead>(r: R, columns: usize) -> Result<(LogHeader, Vec<Vec<u32>>)> {
    let mut header = Vec::new();
    let mut rows = Vec::new();
    let mut seen_columns = false;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: malformed header", lineno + 1)))?;
            header.push((k.trim().to_string(), v.trim().to_string()));
            continue;
        }
        if !seen_columns {
            seen_columns = true;
            if line.starts_with("shot") {
                continue;
            }
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Parse(format!("line {}: expected {columns} fields", lineno + 1)));
        }
        let nums: Vec<u64> = fields
            .iter()
            .map(|f| f.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        if nums[0] as usize != rows.len() {
            return Err(Error::Parse(format!("line {}: shot index {} out of order", lineno + 1, nums[0])));
        }
        rows.push(nums[1..].iter().map(|&x| x as u32).collect());
    }
    Ok((LogHeader(header), rows))
}

/// Indexed family of CP maps `E_1..E_J`. The null branch `E_0` is derived
/// so that the branch rates of a trace-one state sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    branches: Vec<KrausSet>,
    null: KrausSet,
}

impl Instrument {
    /// Requires `sum_j pi(E_j) <= 1` within [`PROBABILITY_TOL`]. The null
    /// branch is `X -> D^(1/2) X D^(1/2)` with `D = 1 - sum_j pi(E_j)`.
    pub fn new(branches: Vec<KrausSet>) -> Result<Self> {
        let first = branches.first().ok_or_else(|| Error::contract("instrument has no branches"))?;
        let d = first.dim();
        for b in &branches {
            ensure_dim(d, b.dim())?;
        }
        let total = branches.iter().fold(linalg::zeros(d, d), |acc, b| acc + crate::superop::pi_operator(b));
        let max_eigenvalue = linalg::max_eigenvalue(&total);
        if max_eigenvalue > 1.0 + PROBABILITY_TOL {
            return Err(Error::SuperUnitalInstrument { max_eigenvalue });
        }
        let deficit = linalg::identity(d) - total;
        let null = KrausSet::nonmixing(linalg::psd_sqrt(&deficit))?;
        Ok(Instrument { dim: d, branches, null })
    }

    /// Projective instrument `E_j(X) = P_j X P_j`.
    pub fn projective(projectors: Vec<CMatrix>) -> Result<Self> {
        Self::new(projectors.into_iter().map(KrausSet::nonmixing).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Branch `j` for `j in 0..=J`, with 0 the null branch.
    pub fn branch(&self, j: usize) -> Option<&KrausSet> {
        if j == 0 {
            Some(&self.null)
        } else {
            self.branches.get(j - 1)
        }
    }

    pub fn branch_superops(&self) -> Vec<SuperOperator> {
        (0..=self.num_branches()).map(|j| superop_from_kraus(self.branch(j).unwrap())).collect()
    }

    /// Response rates `p_j = tr E_j(rho)` for `j = 0..=J`.
    pub fn branch_rates(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        ensure_dim(self.dim, rho.dim())?;
        (0..=self.num_branches()).map(|j| Ok(linalg::trace(&self.branch(j).unwrap().apply(rho.matrix())?).re)).collect()
    }

    /// Exact joint rates `p(j, k) = tr(P'_k E_j(rho))`, indexed by branch
    /// label and detector label.
    pub fn coincidence_probabilities(&self, rho: &DensityOperator, detector: &QuantumMeasure) -> Result<Vec<Vec<f64>>> {
        ensure_dim(self.dim, rho.dim())?;
        ensure_dim(self.dim, detector.dim())?;
        let outcomes = detector.num_labeled() + 1;
        (0..=self.num_branches())
            .map(|j| {
                let out = self.branch(j).unwrap().apply(rho.matrix())?;
                let out = DensityOperator::from_trusted(out);
                let mut row = vec![0.0; outcomes];
                for (idx, p) in response_probabilities(detector, &out)?.into_iter().enumerate() {
                    row[detector.label_of(idx)] = p;
                }
                Ok(row)
            })
            .collect()
    }
}

/// Device probed by an experiment.
#[derive(Debug, Clone)]
pub enum Device {
    Detector(QuantumMeasure),
    Coincidence { instrument: Instrument, detector: QuantumMeasure },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub shots: usize,
    /// Trace-one source.
    pub source: DensityOperator,
    pub device: Device,
}

#[derive(Debug, Clone)]
pub enum Simulation {
    Detections(EventLog),
    Coincidences(CoincidenceLog),
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation> {
    match &cfg.device {
        Device::Detector(m) => sample_detections(&cfg.source, m, cfg.shots, cfg.seed).map(Simulation::Detections),
        Device::Coincidence { instrument, detector } => {
            sample_coincidences(&cfg.source, instrument, detector, cfg.shots, cfg.seed).map(Simulation::Coincidences)
        }
    }
}

/// Detection probabilities indexed by label `0..=K`.
pub fn label_probabilities(source: &DensityOperator, m: &QuantumMeasure) -> Result<Vec<f64>> {
    let mut p = vec![0.0; m.num_labeled() + 1];
    for (idx, v) in response_probabilities(m, source)?.into_iter().enumerate() {
        p[m.label_of(idx)] = v;
    }
    Ok(p)
}

/// Multinomial detection events for a trace-one source.
pub fn sample_detections(source: &DensityOperator, m: &QuantumMeasure, shots: usize, seed: u64) -> Result<EventLog> {
    source.require_normalized(PROBABILITY_TOL)?;
    let p = label_probabilities(source, m)?;
    let labels = sample_categorical(&p, shots, seed)?;
    EventLog::new(seed, GENERATOR_ID.to_string(), p.len(), labels)
}

/// Coincidence events `(j, k)` between an instrument and a second detector
/// observing its output.
pub fn sample_coincidences(
    source: &DensityOperator,
    instrument: &Instrument,
    detector: &QuantumMeasure,
    shots: usize,
    seed: u64,
) -> Result<CoincidenceLog> {
    source.require_normalized(PROBABILITY_TOL)?;
    let joint = instrument.coincidence_probabilities(source, detector)?;
    let outcomes = detector.num_labeled() + 1;
    let flat: Vec<f64> = joint.iter().flatten().copied().collect();
    let draws = sample_categorical(&flat, shots, seed)?;
    let pairs = draws.into_iter().map(|x| (x / outcomes as u32, x % outcomes as u32)).collect();
    CoincidenceLog::new(seed, GENERATOR_ID.to_string(), joint.len(), outcomes, pairs)
}

/// Relative frequencies with binomial standard errors `sqrt(p(1-p)/N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub shots: u64,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl Rates {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::EmptyLog);
        }
        let nf = n as f64;
        let p_hat: Vec<f64> = counts.iter().map(|&k| k as f64 / nf).collect();
        let stderr = p_hat.iter().map(|p| (p * (1.0 - p) / nf).sqrt()).collect();
        Ok(Rates { shots: n, p_hat, stderr })
    }
}

pub fn empirical_rates(log: &EventLog) -> Result<Rates> {
    Rates::from_counts(&log.counts())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRates {
    /// Joint frequencies, flattened row-major over `(j, k)`.
    pub joint: Rates,
    pub num_outcomes: usize,
    pub branch_marginal: Rates,
    pub detector_marginal: Rates,
}

impl CoincidenceRates {
    pub fn joint_at(&self, j: usize, k: usize) -> f64 {
        self.joint.p_hat[j * self.num_outcomes + k]
    }
}

pub fn empirical_coincidence_rates(log: &CoincidenceLog) -> Result<CoincidenceRates> {
    let counts = log.counts();
    let flat: Vec<u64> = counts.iter().flatten().copied().collect();
    let branch: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
    let detector: Vec<u64> = (0..log.num_outcomes).map(|k| counts.iter().map(|row| row[k]).sum()).collect();
    Ok(CoincidenceRates {
        joint: Rates::from_counts(&flat)?,
        num_outcomes: log.num_outcomes,
        branch_marginal: Rates::from_counts(&branch)?,
        detector_marginal: Rates::from_counts(&detector)?,
    })
}

/// Sample of scale values for each event (null events map to the null
/// element's value when present). Used for Monte-Carlo moment checks.
pub fn scale_samples(log: &EventLog, det: &crate::measures::Detector) -> Result<Vec<Vec<linalg::C64>>> {
    let m = det.measure();
    let by_label: Vec<Option<&Vec<linalg::C64>>> = (0..log.num_labels)
        .map(|label| {
            (0..m.elements().len()).find(|&idx| m.label_of(idx) == label).map(|idx| &det.scale().values()[idx])
        })
        .collect();
    log.labels()
        .iter()
        .map(|&l| by_label[l as usize].cloned().ok_or_else(|| Error::contract(format!("label {l} has no scale value"))))
        .collect()
}

/// Same distribution for any positive rescaling of a source.
pub fn normalized_source(rho: &DensityOperator) -> Result<DensityOperator> {
    rho.normalized()
}
