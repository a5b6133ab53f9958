use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use acqsens::dataset::write_predictions;
use acqsens::synth::{generate, SimSpec};
use acqsens_ffi::*;
use tempfile::TempDir;

const SPACE: &str = r#"{"axes": [
    {"name": "XRay", "min": 50, "max": 800, "bins": 3, "direction": "quality_increasing"},
    {"name": "Spiral", "min": 0.3, "max": 1.5, "bins": 3, "direction": "quality_decreasing"},
    {"name": "SliceTh", "min": 0.5, "max": 5, "bins": 3, "direction": "quality_decreasing"}
]}"#;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = acq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn simulated_csv(dir: &Path) -> PathBuf {
    let spec: SimSpec = serde_json::from_str(&format!(
        r#"{{"space": {SPACE}, "true_region": [425, 0.9, 2.75], "n_cases": 200,
            "methods": [{{"name": "a"}}, {{"name": "b", "beta2": 0.3}}, {{"name": "c"}}],
            "beta0": -1.5, "beta1": 1.5, "sigma_case": 0.4, "sigma_method": 0.2,
            "mode": "quality_factor", "seed": 5}}"#
    ))
    .unwrap();
    let (table, _) = generate(&spec).unwrap();
    let path = dir.join("data.csv");
    write_predictions(&table, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn config() -> CString {
    c(&format!(r#"{{"schema_version": 1, "space": {SPACE}}}"#))
}

fn load(dir: &Path) -> *mut AcqTable {
    let path = c(simulated_csv(dir).to_str().unwrap());
    let mut table = ptr::null_mut();
    let status = unsafe { acq_table_load(path.as_ptr(), config().as_ptr(), &mut table) };
    assert_eq!(status, AcqStatus::Ok);
    assert!(!table.is_null());
    table
}

#[test]
fn table_fit_and_json_round_trip() {
    let dir = TempDir::new().unwrap();
    let table = load(dir.path());
    unsafe {
        let mut n = 0usize;
        assert_eq!(acq_table_len(table, &mut n), AcqStatus::Ok);
        assert_eq!(n, 600);
        assert_eq!(acq_table_method_count(table, &mut n), AcqStatus::Ok);
        assert_eq!(n, 3);

        let region = c("[425, 0.9, 2.75]");
        let mut fit = ptr::null_mut();
        assert_eq!(
            acq_fit_population(table, region.as_ptr(), AcqModel::Quality, &mut fit),
            AcqStatus::Ok
        );
        let (mut est, mut se, mut p) = (0.0, 0.0, 0.0);
        assert_eq!(
            acq_fit_coefficient(fit, c("Q").as_ptr(), &mut est, &mut se, &mut p),
            AcqStatus::Ok
        );
        assert!(est > 0.0 && se > 0.0 && p < 0.05, "{est} {se} {p}");
        // Null out-pointers are skipped.
        assert_eq!(
            acq_fit_coefficient(fit, c("Q").as_ptr(), ptr::null_mut(), ptr::null_mut(), &mut p),
            AcqStatus::Ok
        );
        let mut converged = false;
        assert_eq!(acq_fit_converged(fit, &mut converged), AcqStatus::Ok);
        assert!(converged);

        let mut json = ptr::null_mut();
        assert_eq!(acq_fit_to_json(fit, &mut json), AcqStatus::Ok);
        let doc: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(doc["coefficient_names"][1], "Q");
        assert_eq!(doc["coefficients"][1].as_f64().unwrap(), est);
        acq_string_free(json);

        assert_eq!(
            acq_fit_coefficient(fit, c("nope").as_ptr(), &mut est, ptr::null_mut(), ptr::null_mut()),
            AcqStatus::InputError
        );
        assert!(last_error().contains("nope"));
        acq_fit_free(fit);

        let mut fit = ptr::null_mut();
        assert_eq!(
            acq_fit_population(table, region.as_ptr(), AcqModel::Distance, &mut fit),
            AcqStatus::Ok
        );
        assert_eq!(
            acq_fit_coefficient(fit, c("dQ").as_ptr(), &mut est, &mut se, &mut p),
            AcqStatus::Ok
        );
        assert!(est > 0.0);
        acq_fit_free(fit);
        acq_table_free(table);
    }
}

#[test]
fn optimize_returns_reports() {
    let dir = TempDir::new().unwrap();
    let table = load(dir.path());
    unsafe {
        let mut json = ptr::null_mut();
        assert_eq!(acq_optimize(table, &mut json), AcqStatus::Ok, "{}", last_error());
        let doc: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        acq_string_free(json);
        assert_eq!(doc["candidates"].as_array().unwrap().len(), 27);
        assert!(!doc["layers"]["layers"].as_array().unwrap().is_empty());
        assert!(!doc["selection"]["entries"].as_array().unwrap().is_empty());
        acq_table_free(table);
    }
}

#[test]
fn error_paths_set_status_and_message() {
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(
            acq_table_load(ptr::null(), config().as_ptr(), &mut table),
            AcqStatus::NullArgument
        );
        assert!(last_error().contains("csv_path"));
        assert!(table.is_null());

        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(
            acq_table_load(bad.as_ptr().cast(), config().as_ptr(), &mut table),
            AcqStatus::InvalidUtf8
        );
        assert_eq!(
            acq_table_load(c("/no/such/file.csv").as_ptr(), config().as_ptr(), &mut table),
            AcqStatus::InputError
        );
        assert_eq!(
            acq_table_load(c("x.csv").as_ptr(), c("{not json").as_ptr(), &mut table),
            AcqStatus::InputError
        );

        let dir = TempDir::new().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert_eq!(
            acq_table_load(c(empty.to_str().unwrap()).as_ptr(), config().as_ptr(), &mut table),
            AcqStatus::InputError
        );
        assert!(last_error().contains("EmptyTable"));

        let mut n = 0usize;
        assert_eq!(acq_table_len(ptr::null(), &mut n), AcqStatus::NullArgument);
        // A successful call clears the message.
        assert_eq!(acq_wilcoxon_greater([1.0].as_ptr(), 1, &mut 0.0), AcqStatus::Ok);
        assert!(acq_last_error().is_null());

        acq_table_free(ptr::null_mut());
        acq_fit_free(ptr::null_mut());
        acq_string_free(ptr::null_mut());
    }
}

#[test]
fn empty_selection_maps_to_empty_result() {
    let dir = TempDir::new().unwrap();
    let path = c(simulated_csv(dir.path()).to_str().unwrap());
    let cfg = c(&format!(
        r#"{{"schema_version": 1, "space": {SPACE}, "constraints": [{{"axis": "XRay", "op": "le", "value": 10}}]}}"#
    ));
    unsafe {
        let mut table = ptr::null_mut();
        assert_eq!(acq_table_load(path.as_ptr(), cfg.as_ptr(), &mut table), AcqStatus::Ok);
        let mut json = ptr::null_mut();
        assert_eq!(acq_optimize(table, &mut json), AcqStatus::EmptyResult);
        assert!(json.is_null());
        acq_table_free(table);
    }
}

#[test]
fn scalar_helpers() {
    let dir = TempDir::new().unwrap();
    let table = load(dir.path());
    unsafe {
        let mut d = 0.0;
        let point = [100.0, 1.5, 1.25];
        let th = [200.0, 1.5, 1.25];
        assert_eq!(
            acq_signed_distance(table, point.as_ptr(), th.as_ptr(), 3, &mut d),
            AcqStatus::Ok
        );
        assert_eq!(d, 1.0);
        assert_eq!(
            acq_signed_distance(table, point.as_ptr(), th.as_ptr(), 2, &mut d),
            AcqStatus::InputError
        );
        acq_table_free(table);

        let mut p = 0.0;
        let diffs = [0.1, 0.2, 0.05, 0.3, 0.15];
        assert_eq!(acq_wilcoxon_greater(diffs.as_ptr(), 5, &mut p), AcqStatus::Ok);
        assert_eq!(p, 0.03125);
        assert_eq!(acq_wilcoxon_greater(ptr::null(), 3, &mut p), AcqStatus::NullArgument);

        let version = CStr::from_ptr(acq_version()).to_str().unwrap();
        assert_eq!(version, env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn cli_entry_point_returns_exit_codes() {
    let args: Vec<CString> = ["acqsens", "no-such-command"].iter().map(|s| c(s)).collect();
    let argv: Vec<*const std::ffi::c_char> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { acq_run_cli(2, argv.as_ptr()) }, 1);

    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("e.csv");
    std::fs::write(&empty, "").unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, config().to_str().unwrap()).unwrap();
    let args: Vec<CString> = [
        "acqsens",
        "summarize",
        "--input",
        empty.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]
    .iter()
    .map(|s| c(s))
    .collect();
    let argv: Vec<*const std::ffi::c_char> = args.iter().map(|a| a.as_ptr()).collect();
    assert_eq!(unsafe { acq_run_cli(6, argv.as_ptr()) }, 1);
}

#[test]
fn header_compiles_as_c() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/acqsens.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in [
        "acq_table_load",
        "acq_fit_population",
        "acq_optimize",
        "acq_last_error",
        "ACQ_STATUS_OK",
    ] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    let Ok(cc) = which_cc() else { return };
    let dir = TempDir::new().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "acqsens.h"
int main(void) {
    AcqTable *t = NULL;
    AcqStatus s = acq_table_load("x.csv", "{}", &t);
    if (s != ACQ_STATUS_OK) { const char *m = acq_last_error(); (void)m; }
    acq_table_free(t);
    return (int)ACQ_MODEL_DISTANCE;
}
"#,
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| std::process::Command::new(cc).arg("--version").output().is_ok())
        .ok_or(())
}
