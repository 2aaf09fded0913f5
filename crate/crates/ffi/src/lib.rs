//! C ABI over `hadamard-core`.
//!
//! Every function returns an [`HdStatus`]; on failure the message is
//! available from [`hd_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hadamard_core::config::{list_catalog, parse};
use hadamard_core::pencil::{generalized_roots, PencilRoots};
use hadamard_core::pipeline::{evaluate, overall_exit_code, report_json, run_dift, Mode, Status};
use hadamard_core::specfun::{bessel_j, bessel_zero};
use hadamard_core::{Error, ErrorKind};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Schema = 3,
    Numerical = 4,
    Validation = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HdStatus {
    set_error(&e.to_string());
    match e.kind() {
        ErrorKind::Schema => HdStatus::Schema,
        ErrorKind::Input => HdStatus::InvalidArgument,
        ErrorKind::Validation => HdStatus::Validation,
        ErrorKind::Numerical => HdStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HdStatus>) -> HdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HdStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            HdStatus::Panic
        }
    }
}

fn null(what: &str) -> HdStatus {
    set_error(&format!("{what} is null"));
    HdStatus::NullPointer
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, HdStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, HdStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        HdStatus::InvalidArgument
    })
}

/// Message of the last failed call on this thread ("" after a success).
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn hd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Bessel function `J_k(x)` for `0 <= x <= 100`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn hd_bessel_j(k: u32, x: f64, out: *mut f64) -> HdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = bessel_j(k, x).map_err(|e| status_of(&e))?;
        Ok(())
    })
}

/// The `m`-th positive zero of `J_k`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn hd_bessel_zero(k: u32, m: u32, out: *mut f64) -> HdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = bessel_zero(k, m).map_err(|e| status_of(&e))?.value;
        Ok(())
    })
}

/// Roots of `det(A - s B)`.
pub struct HdPencil {
    roots: PencilRoots,
}

/// Solves the pencil for row-major `n x n` matrices `a` (symmetric) and `b`
/// (symmetric positive definite).
///
/// # Safety
/// `a` and `b` must point to `n * n` doubles; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hd_pencil_new(a: *const f64, b: *const f64, n: usize, out: *mut *mut HdPencil) -> HdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        if a.is_null() || b.is_null() {
            return Err(null("matrix"));
        }
        if n == 0 || n > hadamard_core::pencil::MAX_DIM {
            set_error(&format!("pencil dimension {n} outside 1..={}", hadamard_core::pencil::MAX_DIM));
            return Err(HdStatus::InvalidArgument);
        }
        let a = DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(a, n * n));
        let b = DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(b, n * n));
        let roots = generalized_roots(&a, &b).map_err(|e| status_of(&e))?;
        *out = Box::into_raw(Box::new(HdPencil { roots }));
        Ok(())
    })
}

/// Number of roots (the pencil dimension).
///
/// # Safety
/// `p` must be a live handle from `hd_pencil_new`.
#[no_mangle]
pub unsafe extern "C" fn hd_pencil_dim(p: *const HdPencil) -> usize {
    p.as_ref().map_or(0, |p| p.roots.dim())
}

/// Copies the ascending roots into `roots` (capacity `cap`) and, if
/// `simple` is non-null, their simplicity flags.
///
/// # Safety
/// `p` must be a live handle; `roots` must hold `cap` doubles and `simple`
/// (if non-null) `cap` bools.
#[no_mangle]
pub unsafe extern "C" fn hd_pencil_roots(p: *const HdPencil, roots: *mut f64, simple: *mut bool, cap: usize) -> HdStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pencil"))?;
        if roots.is_null() {
            return Err(null("roots"));
        }
        let n = p.roots.dim();
        if cap < n {
            set_error(&format!("buffer holds {cap} roots, need {n}"));
            return Err(HdStatus::InvalidArgument);
        }
        std::slice::from_raw_parts_mut(roots, n).copy_from_slice(&p.roots.roots);
        if !simple.is_null() {
            std::slice::from_raw_parts_mut(simple, n).copy_from_slice(&p.roots.simple);
        }
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from `hd_pencil_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_pencil_free(p: *mut HdPencil) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Reports of one scenario config run.
pub struct HdRun {
    reports: Vec<CString>,
    exit_code: i32,
}

/// Runs every scenario of a JSON config in memory. `validate` non-zero
/// adds finite-element validation; `quick` non-zero halves resolutions.
/// Scenario-level failures do not fail the call: they are recorded in the
/// reports and in [`hd_run_exit_code`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hd_run_scenarios(
    config_json: *const c_char,
    validate: i32,
    quick: i32,
    seed: u64,
    out: *mut *mut HdRun,
) -> HdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let text = str_arg(config_json, "config")?;
        let config = parse(text).map_err(|e| status_of(&e))?;
        let mode = if validate != 0 { Mode::Validate } else { Mode::Predict };
        let reports = evaluate(&config, mode, 1, quick != 0, Some(seed)).map_err(|e| status_of(&e))?;
        let exit_code = overall_exit_code(&reports);
        let reports = reports
            .iter()
            .map(|r| report_json(r).map(|s| CString::new(s).unwrap_or_default()))
            .collect::<Result<_, _>>()
            .map_err(|e| status_of(&e))?;
        *out = Box::into_raw(Box::new(HdRun { reports, exit_code }));
        Ok(())
    })
}

/// # Safety
/// `r` must be a live handle from `hd_run_scenarios`.
#[no_mangle]
pub unsafe extern "C" fn hd_run_count(r: *const HdRun) -> usize {
    r.as_ref().map_or(0, |r| r.reports.len())
}

/// CLI-equivalent exit code: 0 pass, 1 validation failure, 3 numerical.
///
/// # Safety
/// `r` must be a live handle from `hd_run_scenarios`.
#[no_mangle]
pub unsafe extern "C" fn hd_run_exit_code(r: *const HdRun) -> i32 {
    r.as_ref().map_or(-1, |r| r.exit_code)
}

/// JSON report of scenario `i`, owned by the handle (null if out of range).
///
/// # Safety
/// `r` must be a live handle from `hd_run_scenarios`.
#[no_mangle]
pub unsafe extern "C" fn hd_run_report(r: *const HdRun, i: usize) -> *const c_char {
    r.as_ref()
        .and_then(|r| r.reports.get(i))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `r` must be null or a handle from `hd_run_scenarios` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_run_free(r: *mut HdRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// A continuation example run.
pub struct HdDift {
    report: CString,
    passed: bool,
}

/// Checks and continues the named catalog example. A failed hypothesis is
/// reported through [`hd_dift_passed`], not as a call failure.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hd_dift_run(name: *const c_char, out: *mut *mut HdDift) -> HdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let name = str_arg(name, "name")?;
        let report = run_dift(name).map_err(|e| status_of(&e))?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| status_of(&Error::Io(e.to_string())))?;
        *out = Box::into_raw(Box::new(HdDift {
            report: CString::new(json).unwrap_or_default(),
            passed: report.status == Status::Pass,
        }));
        Ok(())
    })
}

/// # Safety
/// `d` must be a live handle from `hd_dift_run`.
#[no_mangle]
pub unsafe extern "C" fn hd_dift_passed(d: *const HdDift) -> bool {
    d.as_ref().is_some_and(|d| d.passed)
}

/// JSON report, owned by the handle.
///
/// # Safety
/// `d` must be a live handle from `hd_dift_run`.
#[no_mangle]
pub unsafe extern "C" fn hd_dift_report(d: *const HdDift) -> *const c_char {
    d.as_ref().map_or(std::ptr::null(), |d| d.report.as_ptr())
}

/// # Safety
/// `d` must be null or a handle from `hd_dift_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hd_dift_free(d: *mut HdDift) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Writes the newline-separated catalog into `buf` (capacity `cap`, NUL
/// included) and its full size into `needed`. A null `buf` only queries.
///
/// # Safety
/// `buf` (if non-null) must hold `cap` bytes; `needed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hd_catalog(buf: *mut c_char, cap: usize, needed: *mut usize) -> HdStatus {
    guard(|| {
        let needed = out_ref(needed, "needed")?;
        let text = list_catalog().join("\n");
        *needed = text.len() + 1;
        if buf.is_null() {
            return Ok(());
        }
        if cap < text.len() + 1 {
            set_error(&format!("buffer holds {cap} bytes, need {}", text.len() + 1));
            return Err(HdStatus::InvalidArgument);
        }
        let dst = std::slice::from_raw_parts_mut(buf as *mut u8, text.len() + 1);
        dst[..text.len()].copy_from_slice(text.as_bytes());
        dst[text.len()] = 0;
        Ok(())
    })
}
