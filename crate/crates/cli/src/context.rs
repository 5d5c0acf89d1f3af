use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qtomo::io::to_canonical_string;
use qtomo::ops::Tolerances;
use qtomo::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

/// 0 success, 2 input/validation, 3 reconstruction infeasible, 4 numerical.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NotInformationallyComplete { .. } | Error::InsufficientEvents { .. } | Error::EmptyLog => 3,
        Error::Numerical(_) => 4,
        _ => 2,
    }
}

pub fn emit_error(kind: &str, message: &str, code: u8) {
    let v = json!({ "error": { "kind": kind, "message": message, "exit_code": code } });
    let text = to_canonical_string(&v).unwrap_or_else(|_| format!("{v}\n"));
    eprint!("{text}");
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub struct Context {
    pub tol: Tolerances,
    pub rtol: Option<f64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    params: BTreeMap<String, Value>,
    summary: Option<Value>,
}

impl Context {
    pub fn new(tol_psd: f64, tol_herm: f64, rtol: Option<f64>) -> Self {
        Context {
            tol: Tolerances { herm: tol_herm, psd: tol_psd },
            rtol,
            inputs: Vec::new(),
            outputs: Vec::new(),
            params: BTreeMap::new(),
            summary: None,
        }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.params.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn read_json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        self.inputs.push(path.to_path_buf());
        qtomo::io::read_json(path)
    }

    pub fn open(&mut self, path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
        self.inputs.push(path.to_path_buf());
        let f = std::fs::File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Ok(std::io::BufReader::new(f))
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        write_atomic(path, contents)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, path: &Path, v: &T) -> Result<()> {
        let text = to_canonical_string(v)?;
        self.write(path, text.as_bytes())
    }

    pub fn set_summary<T: Serialize>(&mut self, v: &T) -> Result<()> {
        self.summary = Some(serde_json::to_value(v)?);
        Ok(())
    }

    pub fn summary_text(&self) -> Option<String> {
        self.summary.as_ref().and_then(|s| to_canonical_string(s).ok())
    }
}

fn path_strings(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

#[derive(Serialize)]
pub struct Manifest {
    command: String,
    tool: &'static str,
    version: &'static str,
    inputs: Vec<String>,
    outputs: Vec<String>,
    seed: Option<u64>,
    tolerances: Value,
    parameters: BTreeMap<String, Value>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Value>,
    wall_time_s: f64,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, ctx: &Context, wall_time_s: f64, err: Option<&Error>) -> Self {
        Manifest {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            inputs: path_strings(&ctx.inputs),
            outputs: path_strings(&ctx.outputs),
            seed,
            tolerances: json!({ "psd": ctx.tol.psd, "herm": ctx.tol.herm, "rtol": ctx.rtol }),
            parameters: ctx.params.clone(),
            status: if err.is_some() { "error" } else { "ok" },
            error: err.map(|e| json!({ "kind": e.kind(), "message": e.to_string(), "exit_code": exit_code(e) })),
            summary: ctx.summary.clone(),
            wall_time_s,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, to_canonical_string(self)?.as_bytes())
    }
}
