use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qtomo::io::{matrix_from_json, to_canonical_string, MatrixFile};
use qtomo::linalg::max_norm;
use serde_json::Value;
use tempfile::TempDir;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn qtomo<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_qtomo")).args(args).env_remove("QTOMO_SEED").output().expect("spawn qtomo")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_value(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_error(o: &Output) -> Value {
    let v: Value = serde_json::from_slice(&o.stderr).expect("stderr is JSON");
    v["error"].clone()
}

fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(src).unwrap() {
        let e = e.unwrap();
        let to = dst.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &to);
        } else {
            fs::copy(e.path(), to).unwrap();
        }
    }
}

fn simulate(out: &Path, device: &str, shots: &str, seed: &str) -> Output {
    qtomo([
        OsStr::new("simulate"),
        fixture("qubit/source.json").as_os_str(),
        fixture(device).as_os_str(),
        OsStr::new("--shots"),
        OsStr::new(shots),
        OsStr::new("--seed"),
        OsStr::new(seed),
        OsStr::new("--out"),
        out.as_os_str(),
    ])
}

#[test]
fn zero_shots_give_an_empty_log() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = simulate(&out, "qubit/pauli6.json", "0", "3");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("events.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1);
    let counts = read_value(&out.join("counts.json"));
    assert!(counts["counts"].as_array().unwrap().iter().all(|c| c.as_u64() == Some(0)));
}

#[test]
fn invalid_measure_exits_2_naming_the_invariant() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = simulate(&out, "qubit/invalid_measure.json", "10", "0");
    assert_eq!(code(&o), 2);
    let err = stderr_error(&o);
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("sum to identity"));
    let manifest = read_value(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "error");
    assert_eq!(manifest["error"]["kind"], err["kind"]);
}

#[test]
fn million_shots_match_golden_counts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = simulate(&out, "qubit/pauli6.json", "1000000", "1234");
    assert_eq!(code(&o), 0);
    let got = fs::read(out.join("counts.json")).unwrap();
    let golden = fs::read(fixture("golden/qubit_pauli6_seed1234_counts.json")).unwrap();
    assert_eq!(got, golden);
}

#[test]
fn seed_comes_from_environment_by_default() {
    let tmp = TempDir::new().unwrap();
    let run = |dir: &str, env: Option<&str>, seed: Option<&str>| {
        let out = tmp.path().join(dir);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qtomo"));
        cmd.arg("simulate")
            .arg(fixture("qubit/source.json"))
            .arg(fixture("qubit/pauli6.json"))
            .args(["--shots", "500", "--out"])
            .arg(&out)
            .env_remove("QTOMO_SEED");
        if let Some(e) = env {
            cmd.env("QTOMO_SEED", e);
        }
        if let Some(s) = seed {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read(out.join("events.csv")).unwrap()
    };
    assert_eq!(run("a", Some("99"), None), run("b", None, Some("99")));
    assert_ne!(run("c", Some("99"), None), run("d", None, None));
}

#[test]
fn coincidence_device_writes_joint_counts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sim");
    let o = simulate(&out, "qubit/instrument_z.json", "2000", "5");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let counts = read_value(&out.join("counts.json"));
    let table = counts["counts"].as_array().unwrap();
    assert_eq!(table.len(), 3);
    // projective Z followed by Z: only diagonal coincidences
    assert_eq!(table[1][2], 0);
    assert_eq!(table[2][1], 0);
    assert_eq!(table[1][1].as_u64().unwrap() + table[2][2].as_u64().unwrap(), 2000);
}

fn tomo(kind: &str, dir: &Path, out: &Path) -> Output {
    qtomo([OsStr::new("tomo"), OsStr::new(kind), dir.as_os_str(), OsStr::new("--out"), out.as_os_str()])
}

#[test]
fn exact_state_bundle_recovers_fixture() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("state.json");
    let o = tomo("state", &fixture("state_exact"), &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_value(&out);
    for key in ["estimate", "residual", "condition_number", "flags"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    let est: MatrixFile = serde_json::from_value(report["estimate"].clone()).unwrap();
    let expected: MatrixFile = qtomo::io::read_json(&fixture("state_exact/expected.json")).unwrap();
    let diff = est.to_matrix().unwrap() - expected.to_matrix().unwrap();
    assert!(max_norm(&diff) < 1e-10);
    assert!(tmp.path().join("state.manifest.json").is_file());
}

#[test]
fn missing_events_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bundle = tmp.path().join("bundle");
    copy_dir(&fixture("detector_z"), &bundle);
    fs::remove_file(bundle.join("rates/p2.json")).unwrap();
    let o = tomo("detector", &bundle, &tmp.path().join("r.json"));
    assert_eq!(code(&o), 2);
    assert!(stderr_error(&o)["message"].as_str().unwrap().contains("events"));

    let state = tmp.path().join("state");
    copy_dir(&fixture("state_exact"), &state);
    fs::remove_file(state.join("rates.json")).unwrap();
    assert_eq!(code(&tomo("state", &state, &tmp.path().join("s.json"))), 2);
}

#[test]
fn rank_deficient_bundle_exits_3() {
    let tmp = TempDir::new().unwrap();
    let bundle = tmp.path().join("bundle");
    copy_dir(&fixture("state_exact"), &bundle);
    fs::copy(fixture("qubit/detector_z.json"), bundle.join("measure.json")).unwrap();
    fs::write(bundle.join("rates.json"), r#"{"p_hat": [0.0, 0.7, 0.3]}"#).unwrap();
    let out = tmp.path().join("r.json");
    let o = tomo("state", &bundle, &out);
    assert_eq!(code(&o), 3);
    let err = stderr_error(&o);
    assert_eq!(err["kind"], "not_informationally_complete");
    let manifest = read_value(&tmp.path().join("r.manifest.json"));
    assert_eq!(manifest["error"]["exit_code"], 3);
    assert!(!out.exists());
}

#[test]
fn identity_process_has_choi_rank_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("p.json");
    let o = tomo("process", &fixture("process_identity"), &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_value(&out);
    assert_eq!(report["estimate"]["choi_rank"], 1);
    assert_eq!(report["estimate"]["kraus"].as_array().unwrap().len(), 1);
}

#[test]
fn detector_bundle_recovers_z_measure() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("d.json");
    assert_eq!(code(&tomo("detector", &fixture("detector_z"), &out)), 0);
    let est = read_value(&out)["estimate"].clone();
    assert!(est.get("null").is_none());
    let elements = est["elements"].as_array().unwrap();
    let p0 = matrix_from_json(&serde_json::from_value(elements[0].clone()).unwrap()).unwrap();
    assert!(max_norm(&(p0 - qtomo::linalg::diag(&[1.0, 0.0]))) < 1e-10);
}

#[test]
fn instrument_bundle_recovers_projective_branches() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("i.json");
    let o = tomo("instrument", &fixture("instrument_z"), &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let est = read_value(&out)["estimate"].clone();
    let branches = est["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 3);
    for b in &branches[1..] {
        assert_eq!(b["choi_rank"], 1);
    }
}

#[test]
fn selfcal_bundle_fits_consistent_data() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sc.json");
    let o = tomo("selfcal", &fixture("selfcal"), &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_value(&out);
    assert!(report["residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["estimate"]["sources"].as_array().unwrap().len(), 6);
}

fn dynamics(model: &str, t: &str, dt: &str, method: &str, out: &Path) -> Output {
    qtomo([
        OsStr::new("dynamics"),
        fixture(model).as_os_str(),
        OsStr::new("--t"),
        OsStr::new(t),
        OsStr::new("--dt"),
        OsStr::new(dt),
        OsStr::new("--method"),
        OsStr::new(method),
        OsStr::new("--out"),
        out.as_os_str(),
    ])
}

fn snapshots(p: &Path) -> Vec<(f64, qtomo::linalg::CMatrix)> {
    read_value(p)["snapshots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| {
            let m = matrix_from_json(&serde_json::from_value(s["matrix"].clone()).unwrap()).unwrap();
            (s["t"].as_f64().unwrap(), m)
        })
        .collect()
}

#[test]
fn zero_hamiltonian_is_constant() {
    let tmp = TempDir::new().unwrap();
    for method in ["slice", "exact", "lindblad"] {
        let out = tmp.path().join(format!("{method}.json"));
        assert_eq!(code(&dynamics("models/zero.json", "2", "0.25", method, &out)), 0);
        let snaps = snapshots(&out);
        assert_eq!(snaps.len(), 9);
        for (_, m) in &snaps {
            assert!(max_norm(&(m - &snaps[0].1)) < 1e-14);
        }
        let manifest = read_value(&tmp.path().join(format!("{method}.manifest.json")));
        assert_eq!(manifest["parameters"]["method"], method);
    }
}

#[test]
fn dephasing_off_diagonal_decays_at_twice_gamma() {
    let tmp = TempDir::new().unwrap();
    let gamma = 0.25;
    for method in ["exact", "lindblad"] {
        let out = tmp.path().join(format!("{method}.json"));
        assert_eq!(code(&dynamics("models/dephasing.json", "3", "0.1", method, &out)), 0);
        for (t, m) in snapshots(&out) {
            assert!((m[(0, 1)].re - 0.5 * (-2.0 * gamma * t).exp()).abs() < 1e-6, "{method} t={t}");
        }
    }
}

#[test]
fn slice_method_reports_richardson_ratio_near_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s.json");
    let o = dynamics("models/driven.json", "1", "0.005", "slice", &out);
    assert_eq!(code(&o), 0);
    let ratio = read_value(&out)["richardson"]["ratio"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["richardson"]["ratio"].as_f64().unwrap(), ratio);
}

#[test]
fn negative_dt_exits_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("t.json");
    let o = dynamics("models/zero.json", "1", "-0.1", "exact", &out);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
    assert_eq!(read_value(&tmp.path().join("t.manifest.json"))["status"], "error");
}

#[test]
fn lindblad_method_rejects_potential() {
    let tmp = TempDir::new().unwrap();
    let o = dynamics("models/potential.json", "1", "0.1", "lindblad", &tmp.path().join("t.json"));
    assert_eq!(code(&o), 2);
    assert_eq!(code(&dynamics("models/potential.json", "1", "0.1", "exact", &tmp.path().join("e.json"))), 0);
}

#[test]
fn lines_table_for_diag_013() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("lines.json");
    let plot = tmp.path().join("lines.csv");
    let o = qtomo([
        OsStr::new("report"),
        OsStr::new("lines"),
        OsStr::new("--hamiltonian"),
        fixture("qubit/hamiltonian_013.json").as_os_str(),
        OsStr::new("--out"),
        out.as_os_str(),
        OsStr::new("--plot"),
        plot.as_os_str(),
    ]);
    assert_eq!(code(&o), 0);
    let lines = read_value(&out)["lines"].as_array().unwrap().clone();
    let nu: Vec<f64> = lines.iter().map(|l| l["nu"].as_f64().unwrap()).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    assert_eq!(nu.len(), 3);
    for (got, k) in nu.iter().zip([1.0, 2.0, 3.0]) {
        assert!((got - k / two_pi).abs() < 1e-14);
    }
    let csv = fs::read_to_string(plot).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn uncertainty_on_projective_detector_has_zero_excess() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("u.json");
    let o = qtomo([
        OsStr::new("report"),
        OsStr::new("uncertainty"),
        OsStr::new("--state"),
        fixture("qubit/source.json").as_os_str(),
        OsStr::new("--detector"),
        fixture("qubit/detector_z.json").as_os_str(),
        OsStr::new("--out"),
        out.as_os_str(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_value(&out);
    assert_eq!(r["projective"], true);
    assert!(r["spread"]["excess"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn unitary_channel_is_lossless() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c.json");
    let o = qtomo([
        OsStr::new("report"),
        OsStr::new("classify"),
        OsStr::new("--channel"),
        fixture("qubit/hadamard.json").as_os_str(),
        OsStr::new("--out"),
        out.as_os_str(),
    ]);
    assert_eq!(code(&o), 0);
    let c = &read_value(&out)["classification"];
    assert_eq!(c["lossless"], true);
    assert_eq!(c["mixing"], false);
}

#[test]
fn outputs_are_canonical_and_round_trip() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    assert_eq!(code(&simulate(&sim, "qubit/pauli6.json", "100", "1")), 0);
    let report = tmp.path().join("p.json");
    assert_eq!(code(&tomo("process", &fixture("process_identity"), &report)), 0);
    for p in [sim.join("counts.json"), sim.join("manifest.json"), report.clone(), tmp.path().join("p.manifest.json")] {
        let text = fs::read_to_string(&p).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(to_canonical_string(&v).unwrap(), text, "{}", p.display());
    }
}

#[test]
fn usage_errors_are_json_with_exit_2() {
    let o = qtomo(["tomo", "nonsense", "dir"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_error(&o)["kind"], "usage");
    assert_eq!(code(&qtomo(["--help"])), 0);
}
