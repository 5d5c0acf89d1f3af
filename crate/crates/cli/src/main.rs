//! `qtomo`: simulation, tomography, dynamics and reports from the command
//! line. Every run writes a manifest next to its primary output.

mod context;
mod dynamics_cmd;
mod report_cmd;
mod simulate_cmd;
mod tomo_cmd;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qtomo::ops::{DEFAULT_TOL_HERM, DEFAULT_TOL_PSD};
use qtomo::Error;

use context::{emit_error, exit_code, Context, Manifest};

#[derive(Parser)]
#[command(name = "qtomo", version, about = "Quantum tomography workbench")]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct TolArgs {
    /// Negative-eigenvalue tolerance for input states.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL_PSD)]
    tol_psd: f64,
    /// Hermiticity tolerance for input states.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL_HERM)]
    tol_herm: f64,
    /// Relative tolerance for rank decisions and iteration stopping.
    #[arg(long, global = true)]
    rtol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample detection events for a source and a device.
    Simulate {
        source: PathBuf,
        device: PathBuf,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long, env = "QTOMO_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct an object from a problem bundle directory.
    Tomo {
        kind: TomoKind,
        dir: PathBuf,
        /// Report path (default: `<dir>/report.json`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the projection onto the admissible set.
        #[arg(long)]
        no_project: bool,
        /// Iteration cap for self-calibration.
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
    },
    /// Evolve the initial state of a model.
    Dynamics {
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, allow_negative_numbers = true)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derived reports.
    Report {
        kind: ReportKind,
        #[arg(long)]
        state: Option<PathBuf>,
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(long)]
        quantity: Option<PathBuf>,
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
        #[arg(long)]
        channel: Option<PathBuf>,
        /// CSV file for plot series.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TomoKind {
    State,
    Detector,
    Process,
    Instrument,
    Selfcal,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Slice,
    Exact,
    Lindblad,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportKind {
    Uncertainty,
    Lines,
    Classify,
}

fn kind_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn sibling_manifest(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            emit_error("usage", &e.to_string(), 2);
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let (command, manifest_path, seed) = match &cli.command {
        Command::Simulate { out, seed, .. } => ("simulate".to_string(), out.join("manifest.json"), Some(*seed)),
        Command::Tomo { kind, dir, out, .. } => {
            let out = out.clone().unwrap_or_else(|| dir.join("report.json"));
            (format!("tomo {}", kind_name(kind)), sibling_manifest(&out), None)
        }
        Command::Dynamics { out, .. } => ("dynamics".to_string(), sibling_manifest(out), None),
        Command::Report { kind, out, .. } => (format!("report {}", kind_name(kind)), sibling_manifest(out), None),
    };
    let mut ctx = Context::new(cli.tol.tol_psd, cli.tol.tol_herm, cli.tol.rtol);
    let result = run(&cli.command, &mut ctx);

    let manifest = Manifest::new(&command, seed, &ctx, start.elapsed().as_secs_f64(), result.as_ref().err());
    let written = manifest.write(&manifest_path);
    match (result, written) {
        (Ok(()), Ok(())) => {
            if let Some(summary) = ctx.summary_text() {
                print!("{summary}");
            }
            ExitCode::SUCCESS
        }
        (Err(e), _) | (Ok(()), Err(e)) => {
            let code = exit_code(&e);
            emit_error(e.kind(), &e.to_string(), code);
            ExitCode::from(code)
        }
    }
}

fn run(command: &Command, ctx: &mut Context) -> Result<(), Error> {
    match command {
        Command::Simulate { source, device, shots, seed, out } => {
            simulate_cmd::run(ctx, source, device, *shots, *seed, out)
        }
        Command::Tomo { kind, dir, out, no_project, max_iter } => {
            let out = out.clone().unwrap_or_else(|| dir.join("report.json"));
            tomo_cmd::run(ctx, *kind, dir, &out, !no_project, *max_iter)
        }
        Command::Dynamics { model, t, dt, method, out } => dynamics_cmd::run(ctx, model, *t, *dt, *method, out),
        Command::Report { kind, state, detector, quantity, hamiltonian, hbar, channel, plot, out } => {
            let inputs = report_cmd::Inputs {
                state: state.as_deref(),
                detector: detector.as_deref(),
                quantity: quantity.as_deref(),
                hamiltonian: hamiltonian.as_deref(),
                hbar: *hbar,
                channel: channel.as_deref(),
                plot: plot.as_deref(),
            };
            report_cmd::run(ctx, *kind, &inputs, out)
        }
    }
}
