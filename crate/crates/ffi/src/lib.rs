//! C interface to the nonlocal solver.
//!
//! Configs and results are opaque handles. Every call returns an `NlfemStatus`;
//! on failure `nlfem_last_error` gives a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nonlocal_fem::cli::{execute, resolve, Overrides, RunConfig};
use nonlocal_fem::manufactured::reference_displacement;
use nonlocal_fem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlfemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    Bridging = 5,
    Alignment = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Parsed configuration.
pub struct NlfemConfig {
    config: RunConfig,
    workers: Option<usize>,
}

/// Solved field on the parent mesh nodes.
pub struct NlfemResult {
    coords: Vec<f64>,
    displacements: Vec<f64>,
    error_percent: f64,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(err: &Error) -> NlfemStatus {
    match err.root() {
        Error::Config(_) | Error::Parse { .. } => NlfemStatus::Config,
        Error::Numeric(_) | Error::Domain { .. } => NlfemStatus::Numeric,
        Error::Bridging { .. } => NlfemStatus::Bridging,
        Error::Alignment { .. } => NlfemStatus::Alignment,
        Error::Io(_) => NlfemStatus::Io,
        _ => NlfemStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (NlfemStatus, String)>) -> NlfemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NlfemStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NlfemStatus::Panic
        }
    }
}

fn fail(err: Error) -> (NlfemStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (NlfemStatus, String) {
    (NlfemStatus::NullPointer, format!("{what} is null"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nlfem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nlfem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a TOML configuration.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_config_parse(text: *const c_char, out: *mut *mut NlfemConfig) -> NlfemStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| (NlfemStatus::InvalidArgument, "config is not valid UTF-8".to_string()))?;
        let config = RunConfig::parse(s).map_err(fail)?;
        resolve(&config, &Overrides::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(NlfemConfig { config, workers: None }));
        Ok(())
    })
}

/// Override the worker count (0 = all cores).
///
/// # Safety
/// `config` must come from `nlfem_config_parse` and not be freed.
#[no_mangle]
pub unsafe extern "C" fn nlfem_config_set_workers(config: *mut NlfemConfig, workers: usize) -> NlfemStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.workers = Some(workers);
        Ok(())
    })
}

/// # Safety
/// `config` must come from `nlfem_config_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn nlfem_config_free(config: *mut NlfemConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Solve the configured single run. Writes nothing to disk.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_solve(config: *const NlfemConfig, out: *mut *mut NlfemResult) -> NlfemStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let overrides = Overrides { workers: c.workers, ..Overrides::default() };
        let resolved = resolve(&c.config, &overrides).map_err(fail)?;
        let solved = execute(&resolved).map_err(fail)?;
        let result = NlfemResult {
            coords: solved.mesh.nodes.iter().flat_map(|n| n.coords).collect(),
            displacements: solved.displacements.iter().flat_map(|u| *u).collect(),
            error_percent: solved.error_percent.unwrap_or(f64::NAN),
            report: CString::new(solved.report).expect("report has no NUL bytes"),
        };
        *out = Box::into_raw(Box::new(result));
        Ok(())
    })
}

/// Number of parent mesh nodes, or 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_node_count(result: *const NlfemResult) -> usize {
    result.as_ref().map_or(0, |r| r.coords.len() / 2)
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), (NlfemStatus, String)> {
    if dst.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((NlfemStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copy interleaved node coordinates (x0, y0, x1, y1, ...) into `buf`.
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_coordinates(result: *const NlfemResult, buf: *mut f64, len: usize) -> NlfemStatus {
    guard(|| copy_out(&result.as_ref().ok_or_else(|| null("result"))?.coords, buf, len))
}

/// Copy interleaved nodal displacements (ux0, uy0, ...) into `buf`.
///
/// # Safety
/// `buf` must point to at least `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_displacements(result: *const NlfemResult, buf: *mut f64, len: usize) -> NlfemStatus {
    guard(|| copy_out(&result.as_ref().ok_or_else(|| null("result"))?.displacements, buf, len))
}

/// Peak-error percentage of a validation case; NaN for other problems.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_error_percent(result: *const NlfemResult, out: *mut f64) -> NlfemStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.error_percent;
        Ok(())
    })
}

/// CSV report text; valid while the result lives.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_report(result: *const NlfemResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.report.as_ptr())
}

/// # Safety
/// `result` must come from `nlfem_solve` or be null.
#[no_mangle]
pub unsafe extern "C" fn nlfem_result_free(result: *mut NlfemResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Manufactured displacement (g(x)g(y), 0) with g(s) = L s − s².
///
/// # Safety
/// `out` must point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlfem_reference_displacement(x: f64, y: f64, side: f64, out: *mut f64) -> NlfemStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let u = reference_displacement(x, y, side);
        ptr::copy_nonoverlapping(u.as_ptr(), out, 2);
        Ok(())
    })
}
