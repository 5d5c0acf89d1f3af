use std::path::Path;

use qtomo::io::{Counts, CountsFile, DeviceFile, MatrixFile};
use qtomo::simulator::{self, normalized_source, Simulation, GENERATOR_ID};
use qtomo::Result;
use serde_json::json;

use crate::context::Context;

pub fn run(ctx: &mut Context, source: &Path, device: &Path, shots: usize, seed: u64, out: &Path) -> Result<()> {
    ctx.param("shots", shots);
    ctx.param("generator", GENERATOR_ID);
    let rho: MatrixFile = ctx.read_json(source)?;
    let rho = normalized_source(&rho.to_density(ctx.tol)?)?;
    let device: DeviceFile = ctx.read_json(device)?;
    let device = match device {
        DeviceFile::Measure(m) => simulator::Device::Detector(m.to_measure()?),
        DeviceFile::Coincidence { instrument, detector } => {
            simulator::Device::Coincidence { instrument: instrument.to_instrument()?, detector: detector.to_measure()? }
        }
    };
    let cfg = simulator::ExperimentConfig { seed, shots, source: rho, device };

    let mut csv = Vec::new();
    let counts = match simulator::simulate(&cfg)? {
        Simulation::Detections(log) => {
            log.write_csv(&mut csv)?;
            Counts::Single(log.counts())
        }
        Simulation::Coincidences(log) => {
            log.write_csv(&mut csv)?;
            Counts::Joint(log.counts())
        }
    };
    let file = CountsFile { generator: GENERATOR_ID.to_string(), seed, shots: shots as u64, counts };
    ctx.write(&out.join("events.csv"), &csv)?;
    ctx.write_json(&out.join("counts.json"), &file)?;
    ctx.set_summary(&json!({ "command": "simulate", "shots": shots, "seed": seed, "counts": file.counts }))
}
