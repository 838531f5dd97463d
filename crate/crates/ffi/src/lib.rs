//! C interface to `ccs_core`.
//!
//! Every function returns a [`CcsStatus`]. On failure the message is kept per
//! thread and can be read with [`ccs_last_error_message`] until the next call.
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned through `char **` are released with [`ccs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ccs_core::config::{preset, RunConfig};
use ccs_core::model::ModelConfig;
use ccs_core::observables::ObservableSeries;
use ccs_core::reference::solve_tise;
use ccs_core::runner::{execute, run_and_write, RunReport};
use ccs_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Unsupported = 4,
    Sampling = 5,
    LinearAlgebra = 6,
    Propagation = 7,
    Tolerance = 8,
    Confirmation = 9,
    Io = 10,
    OutOfRange = 11,
    NotAvailable = 12,
    Panic = 13,
    Other = 14,
}

/// Which engine's observable series to read from a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcsEngine {
    Ccs = 0,
    Splitop = 1,
}

/// One recorded time. `autocorr_re`/`autocorr_im` are NaN when not recorded.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CcsRecord {
    pub t: f64,
    pub norm: f64,
    pub kinetic_s: f64,
    pub potential_s: f64,
    pub bath: f64,
    pub interaction: f64,
    pub counter: f64,
    pub total: f64,
    pub c_s: f64,
    pub autocorr_re: f64,
    pub autocorr_im: f64,
    pub density_integral: f64,
}

/// Opaque run configuration.
pub struct CcsConfig(RunConfig);

/// Opaque result of a run.
pub struct CcsReport(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CcsStatus {
    match e.kind() {
        "validation" | "dimension" => CcsStatus::Validation,
        "unsupported" => CcsStatus::Unsupported,
        "sampling" => CcsStatus::Sampling,
        "linear_algebra" => CcsStatus::LinearAlgebra,
        "propagation" => CcsStatus::Propagation,
        "tolerance" => CcsStatus::Tolerance,
        "confirmation" => CcsStatus::Confirmation,
        "io" => CcsStatus::Io,
        _ => CcsStatus::Other,
    }
}

fn fail(status: CcsStatus, msg: impl Into<String>) -> CcsStatus {
    set_error(msg.into());
    status
}

fn from_core(e: Error) -> CcsStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

fn guard(f: impl FnOnce() -> CcsStatus) -> CcsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CcsStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, CcsStatus> {
    if s.is_null() {
        return Err(fail(CcsStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CcsStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn give_string(s: String, out: *mut *mut c_char) -> CcsStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            CcsStatus::Ok
        }
        Err(_) => fail(CcsStatus::Other, "string contains NUL"),
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(CcsStatus::NullArgument, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn ccs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ccs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ccs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_from_toml(toml: *const c_char, out: *mut *mut CcsConfig) -> CcsStatus {
    guard(|| {
        non_null!(out);
        let text = match read_str(toml) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_toml(text) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(CcsConfig(c)));
                CcsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Load a built-in preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_from_preset(name: *const c_char, out: *mut *mut CcsConfig) -> CcsStatus {
    guard(|| {
        non_null!(out);
        let name = match read_str(name) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match preset(name) {
            Ok(c) => {
                *out = Box::into_raw(Box::new(CcsConfig(c)));
                CcsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_free(cfg: *mut CcsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_set_seed(cfg: *mut CcsConfig, seed: u64) -> CcsStatus {
    guard(|| {
        non_null!(cfg);
        (*cfg).0.seed = seed;
        CcsStatus::Ok
    })
}

/// # Safety
/// `cfg` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_set_output_dir(cfg: *mut CcsConfig, dir: *const c_char) -> CcsStatus {
    guard(|| {
        non_null!(cfg);
        match read_str(dir) {
            Ok(d) => {
                (*cfg).0.output_dir = PathBuf::from(d);
                CcsStatus::Ok
            }
            Err(s) => s,
        }
    })
}

/// Check the configuration without running it.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_validate(cfg: *const CcsConfig) -> CcsStatus {
    guard(|| {
        non_null!(cfg);
        match (*cfg).0.validate() {
            Ok(_) => CcsStatus::Ok,
            Err(e) => from_core(e),
        }
    })
}

/// Serialize the configuration, defaults filled in.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_config_to_toml(cfg: *const CcsConfig, out: *mut *mut c_char) -> CcsStatus {
    guard(|| {
        non_null!(cfg, out);
        match (*cfg).0.to_toml() {
            Ok(t) => give_string(t, out),
            Err(e) => from_core(e),
        }
    })
}

fn finish(result: ccs_core::Result<RunReport>, out: *mut *mut CcsReport) -> CcsStatus {
    match result {
        Ok(r) => {
            if let Some(e) = r.ccs.as_ref().and_then(|c| c.outcome.error.as_ref()) {
                let s = status_of(e);
                return fail(s, e.to_string());
            }
            unsafe { *out = Box::into_raw(Box::new(CcsReport(r))) };
            CcsStatus::Ok
        }
        Err(e) => from_core(e),
    }
}

/// Run every engine of the configuration in memory. Long runs are not gated here.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_execute(cfg: *const CcsConfig, out: *mut *mut CcsReport) -> CcsStatus {
    guard(|| {
        non_null!(cfg, out);
        finish(execute(&(*cfg).0), out)
    })
}

/// Run and write all artifacts into the configured output directory.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_run_and_write(cfg: *const CcsConfig, out: *mut *mut CcsReport) -> CcsStatus {
    guard(|| {
        non_null!(cfg, out);
        finish(run_and_write(&(*cfg).0), out)
    })
}

/// # Safety
/// `report` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccs_report_free(report: *mut CcsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

fn series(report: &RunReport, engine: CcsEngine) -> Option<&ObservableSeries> {
    match engine {
        CcsEngine::Ccs => report.ccs.as_ref().map(|r| &r.outcome.series),
        CcsEngine::Splitop => report.splitop.as_ref().map(|r| &r.outcome.series),
    }
}

/// Number of records an engine produced.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_report_record_count(
    report: *const CcsReport,
    engine: CcsEngine,
    out: *mut usize,
) -> CcsStatus {
    guard(|| {
        non_null!(report, out);
        match series(&(*report).0, engine) {
            Some(s) => {
                *out = s.len();
                CcsStatus::Ok
            }
            None => fail(CcsStatus::NotAvailable, format!("no {engine:?} results in this report")),
        }
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_report_record(
    report: *const CcsReport,
    engine: CcsEngine,
    index: usize,
    out: *mut CcsRecord,
) -> CcsStatus {
    guard(|| {
        non_null!(report, out);
        let Some(s) = series(&(*report).0, engine) else {
            return fail(CcsStatus::NotAvailable, format!("no {engine:?} results in this report"));
        };
        if index >= s.len() {
            return fail(CcsStatus::OutOfRange, format!("record {index} of {}", s.len()));
        }
        let bath: f64 = s.bath_modes.iter().map(|m| m[index]).sum();
        let c = s.autocorr.get(index).copied();
        *out = CcsRecord {
            t: s.times[index],
            norm: s.norm[index],
            kinetic_s: s.kinetic_s[index],
            potential_s: s.potential_s[index],
            bath,
            interaction: s.interaction[index],
            counter: s.counter[index],
            total: s.kinetic_s[index] + s.potential_s[index] + bath + s.interaction[index] + s.counter[index],
            c_s: s.c_s[index],
            autocorr_re: c.map_or(f64::NAN, |c| c.re),
            autocorr_im: c.map_or(f64::NAN, |c| c.im),
            density_integral: s.density_integral[index],
        };
        CcsStatus::Ok
    })
}

/// Cross-engine verdict of a two-engine run: `*passed` and the judged deviation.
///
/// # Safety
/// `report` must be a live handle; `passed` and `deviation` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ccs_report_comparison(
    report: *const CcsReport,
    passed: *mut bool,
    deviation: *mut f64,
) -> CcsStatus {
    guard(|| {
        non_null!(report, passed, deviation);
        match &(*report).0.comparison {
            Some(c) => {
                *passed = c.pass;
                *deviation = c.headline().1;
                CcsStatus::Ok
            }
            None => fail(CcsStatus::NotAvailable, "report has no comparison"),
        }
    })
}

/// Lowest eigenvalues of the bare double well on `n_points` points of
/// `[x_min, x_max]`, with squared overlaps against the initial Gaussian.
/// Writes `min(capacity, n_points)` entries into each array.
///
/// # Safety
/// `energies` and `overlaps_sq` must each hold `capacity` doubles; `written` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccs_double_well_levels(
    x_min: f64,
    x_max: f64,
    n_points: usize,
    energies: *mut f64,
    overlaps_sq: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> CcsStatus {
    guard(|| {
        non_null!(energies, overlaps_sq, written);
        let spec = match ModelConfig::default().build() {
            Ok(s) => s,
            Err(e) => return from_core(e),
        };
        match solve_tise(&spec.well, x_min, x_max, n_points) {
            Ok(r) => {
                let n = capacity.min(r.energies.len());
                for i in 0..n {
                    *energies.add(i) = r.energies[i];
                    *overlaps_sq.add(i) = r.overlap_sq(i);
                }
                *written = n;
                CcsStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}
