//! C ABI over the `acqsens` library.
//!
//! Objects cross the boundary as opaque handles created by `acq_*_load` /
//! `acq_fit_*` and released with the matching `acq_*_free`. Every fallible
//! function returns an [`AcqStatus`]; on failure, [`acq_last_error`] gives a
//! message for the calling thread. Strings returned through out-pointers are
//! owned by the caller and released with [`acq_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use acqsens::cli::{parse_region, CliError, RunConfig};
use acqsens::dataset::{load_predictions, PredictionTable};
use acqsens::glmm::{build_design, fit, wald_test, FitOptions, GlmmFit, ModelSpec, RandomFactor};
use acqsens::pareto::{grid_candidates, pareto_decompose, select_configurations, significance_scan, ScanOptions};
use acqsens::quality::{label_quality, signed_distance, ThresholdConfig};
use acqsens::stats::{wilcoxon_signed_rank, Alternative};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcqStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// Invalid input data, configuration or arguments.
    InputError = 3,
    /// The analysis produced nothing to report.
    EmptyResult = 4,
    NumericalError = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A loaded prediction table together with its run configuration.
pub struct AcqTable {
    table: PredictionTable,
    config: RunConfig,
}

/// A fitted mixed-effects model.
pub struct AcqFit {
    fit: GlmmFit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(AcqStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e.exit_code() {
            2 => AcqStatus::EmptyResult,
            3 => AcqStatus::NumericalError,
            _ => AcqStatus::InputError,
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_via_cli {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                CliError::from(e).into()
            }
        }
    )*};
}
impl_via_cli!(
    acqsens::dataset::DatasetError,
    acqsens::glmm::GlmmError,
    acqsens::pareto::ParetoError,
    acqsens::stats::StatsError
);

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(AcqStatus::NumericalError, format!("serialization failed: {e}"))
    }
}

fn null(what: &str) -> Failure {
    Failure(AcqStatus::NullArgument, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AcqStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AcqStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AcqStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AcqStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(AcqStatus::NumericalError, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next `acq_*` call on the same thread.
#[no_mangle]
pub extern "C" fn acq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn acq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn acq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a prediction CSV using the space and load settings of a run
/// configuration given as JSON text.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_table_load(
    csv_path: *const c_char,
    config_json: *const c_char,
    out: *mut *mut AcqTable,
) -> AcqStatus {
    guard(|| {
        let path = text(csv_path, "csv_path")?;
        let config = RunConfig::from_json(text(config_json, "config_json")?)?;
        let table = load_predictions(path, &config.space, config.load_options())?;
        let boxed = Box::into_raw(Box::new(AcqTable { table, config }));
        write(out, boxed, "out").inspect_err(|_| drop(Box::from_raw(boxed)))
    })
}

/// Number of prediction records.
///
/// # Safety
/// `table` must be a live handle; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_table_len(table: *const AcqTable, out_len: *mut usize) -> AcqStatus {
    guard(|| write(out_len, handle(table, "table")?.table.len(), "out_len"))
}

/// Number of distinct methods.
///
/// # Safety
/// `table` must be a live handle; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_table_method_count(table: *const AcqTable, out_count: *mut usize) -> AcqStatus {
    guard(|| write(out_count, handle(table, "table")?.table.methods().len(), "out_count"))
}

/// Releases a table. Null is ignored.
///
/// # Safety
/// `table` must come from [`acq_table_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn acq_table_free(table: *mut AcqTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Which population model [`acq_fit_population`] estimates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcqModel {
    /// Failure on the HQ/LQ indicator.
    Quality = 0,
    /// Failure on the signed distance to the region.
    Distance = 1,
}

/// Fits a population model with Method and CaseID random intercepts for the
/// region given as JSON (array or `{"thresholds": [...]}`).
///
/// # Safety
/// `table` must be a live handle, `region_json` NUL-terminated and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn acq_fit_population(
    table: *const AcqTable,
    region_json: *const c_char,
    model: AcqModel,
    out: *mut *mut AcqFit,
) -> AcqStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let space = t.table.space();
        let region = parse_region(text(region_json, "region_json")?, space)?;
        let mut q = Vec::with_capacity(t.table.len());
        let mut d = Vec::with_capacity(t.table.len());
        for r in t.table.records() {
            q.push(label_quality(&r.params, &region, space)?.code());
            d.push(signed_distance(&r.params, &region, space)?);
        }
        let mut spec = match model {
            AcqModel::Quality => ModelSpec::quality_population(),
            AcqModel::Distance => ModelSpec::distance_population(),
        };
        if t.table.methods().len() < 2 {
            spec.random_intercepts.retain(|f| *f != RandomFactor::Method);
        }
        let design = build_design(&t.table, &spec, Some(&q), Some(&d))?;
        let options = FitOptions {
            firth: t.config.firth,
            ..Default::default()
        };
        let fitted = fit(&design, &options)?;
        let boxed = Box::into_raw(Box::new(AcqFit { fit: fitted }));
        write(out, boxed, "out").inspect_err(|_| drop(Box::from_raw(boxed)))
    })
}

/// Estimate, standard error and two-sided Wald p-value of a named coefficient
/// such as `"(Intercept)"`, `"Q"` or `"dQ"`. Any out-pointer may be null.
///
/// # Safety
/// `fit` must be a live handle and `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn acq_fit_coefficient(
    fit: *const AcqFit,
    name: *const c_char,
    out_estimate: *mut f64,
    out_std_error: *mut f64,
    out_p_value: *mut f64,
) -> AcqStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.fit;
        let w = wald_test(f, text(name, "name")?)?;
        for (out, v) in [
            (out_estimate, w.estimate),
            (out_std_error, w.std_error),
            (out_p_value, w.p_two_sided),
        ] {
            if !out.is_null() {
                out.write(v);
            }
        }
        Ok(())
    })
}

/// Whether the fit met its convergence criteria.
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_fit_converged(fit: *const AcqFit, out: *mut bool) -> AcqStatus {
    guard(|| write(out, handle(fit, "fit")?.fit.converged, "out"))
}

/// The full fit as a JSON document; free with [`acq_string_free`].
///
/// # Safety
/// `fit` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_fit_to_json(fit: *const AcqFit, out_json: *mut *mut c_char) -> AcqStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(fit, "fit")?.fit)?;
        let s = into_c_string(json)?;
        write(out_json, s, "out_json").inspect_err(|_| drop(CString::from_raw(s)))
    })
}

/// Releases a fit. Null is ignored.
///
/// # Safety
/// `fit` must come from [`acq_fit_population`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn acq_fit_free(fit: *mut AcqFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Runs the grid scan, Pareto decomposition and selection with the table's
/// configuration. Writes a JSON object with `candidates`, `layers` and
/// `selection`; free with [`acq_string_free`].
///
/// # Safety
/// `table` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_optimize(table: *const AcqTable, out_json: *mut *mut c_char) -> AcqStatus {
    guard(|| {
        let t = handle(table, "table")?;
        let cfg = &t.config;
        let candidates = grid_candidates(&cfg.grid_space()?);
        let options = ScanOptions {
            alpha: cfg.alpha,
            min_group: cfg.min_group,
            benjamini_hochberg: cfg.benjamini_hochberg,
            fit: FitOptions {
                firth: cfg.firth,
                ..Default::default()
            },
        };
        let results = significance_scan(&t.table, &candidates, &cfg.space, &options)?;
        let layers = pareto_decompose(&results, &cfg.space, cfg.reverse_dominance)?;
        let selection = select_configurations(&layers, &t.table, &cfg.constraints, cfg.alpha)?;
        let json = serde_json::to_string(&serde_json::json!({
            "candidates": results,
            "layers": layers,
            "selection": selection,
        }))?;
        let s = into_c_string(json)?;
        write(out_json, s, "out_json").inspect_err(|_| drop(CString::from_raw(s)))
    })
}

/// Signed max-norm distance of `point` to the region `thresholds` (both of
/// length `dim`) in the table's parameter space; negative inside.
///
/// # Safety
/// `table` must be a live handle; arrays must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn acq_signed_distance(
    table: *const AcqTable,
    point: *const f64,
    thresholds: *const f64,
    dim: usize,
    out_distance: *mut f64,
) -> AcqStatus {
    guard(|| {
        let space = handle(table, "table")?.table.space();
        let region = ThresholdConfig::new(slice(thresholds, dim, "thresholds")?.to_vec());
        let d = signed_distance(slice(point, dim, "point")?, &region, space)?;
        write(out_distance, d, "out_distance")
    })
}

/// One-sided (greater) Wilcoxon signed-rank p-value of paired differences.
///
/// # Safety
/// `diffs` must hold `n` values; `out_p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acq_wilcoxon_greater(diffs: *const f64, n: usize, out_p_value: *mut f64) -> AcqStatus {
    guard(|| {
        let r = wilcoxon_signed_rank(slice(diffs, n, "diffs")?, Alternative::Greater)?;
        write(out_p_value, r.p_value, "out_p_value")
    })
}

/// Runs the command-line interface with `argv[0..argc]` and returns its exit
/// code (0 success, 1 input error, 2 empty result, 3 numerical failure).
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn acq_run_cli(argc: c_int, argv: *const *const c_char) -> c_int {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let n = usize::try_from(argc).unwrap_or(0);
        if n > 0 && argv.is_null() {
            set_error("argv is null");
            return 1;
        }
        let mut args = vec![String::from("acqsens")];
        for i in 0..n {
            match text(*argv.add(i), "argv entry") {
                Ok(s) => args.push(s.to_string()),
                Err(Failure(_, m)) => {
                    set_error(&m);
                    return 1;
                }
            }
        }
        // argv[0] is the program name when supplied.
        if n > 0 {
            args.remove(0);
        }
        acqsens::cli::run(args)
    }));
    result.unwrap_or_else(|_| {
        set_error("internal panic");
        3
    })
}
