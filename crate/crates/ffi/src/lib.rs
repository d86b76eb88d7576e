//! C ABI over the fiscal-monetary game: build a model, synthesize the
//! guaranteed-cost gains, read results back and exchange solutions as JSON.
//!
//! Every fallible call returns an `NcStatus`; on failure the message is
//! available from `nc_last_error_message` on the same thread. Handles and
//! strings returned by the library must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nashcost::fimo::{build_unchecked, MacroParams};
use nashcost::game::{check_assumption1, check_assumption2, AssumptionReport, GameModel};
use nashcost::synthesis::{synthesize, GuaranteedSolution, SynthesisOptions};
use nashcost::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Assumption = 3,
    Synthesis = 4,
    StaleSolution = 5,
    Parse = 6,
    Numerical = 7,
    Panic = 8,
}

/// Opaque model handle.
pub struct NcModel {
    params: MacroParams,
    model: GameModel,
}

/// Opaque solution handle.
pub struct NcSolution {
    inner: GuaranteedSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> NcStatus {
    match e {
        Error::Assumption(_) => NcStatus::Assumption,
        Error::StaleSolution(_) => NcStatus::StaleSolution,
        Error::Json(_) | Error::Parse { .. } => NcStatus::Parse,
        Error::Config(_) | Error::Dimension(_) | Error::NonFinite(_) => NcStatus::InvalidArgument,
        Error::Synthesis(_) | Error::Certificate(_) | Error::NotConverged { .. } => {
            NcStatus::Synthesis
        }
        _ => NcStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (NcStatus, String)>) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NcStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NcStatus::Panic
        }
    }
}

fn fail(e: Error) -> (NcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NcStatus, String) {
    (NcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

fn model_from(params: MacroParams) -> Result<NcModel, (NcStatus, String)> {
    let model = build_unchecked(&params).map_err(fail)?;
    Ok(NcModel { params, model })
}

fn check_assumptions(m: &GameModel) -> Result<(), (NcStatus, String)> {
    let mut failures = check_assumption1(m).failures;
    failures.extend(check_assumption2(m).failures);
    AssumptionReport { failures }.into_result().map_err(fail)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn nc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Model with the default (estimated) coefficients.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn nc_model_new_default(out: *mut *mut NcModel) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = model_from(MacroParams::default())?;
        *out = Box::into_raw(Box::new(m));
        Ok(())
    })
}

/// Model from a JSON object of coefficients; missing keys take defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nc_model_from_json(
    json: *const c_char,
    out: *mut *mut NcModel,
) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let params: MacroParams = serde_json::from_str(text).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(model_from(params)?));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_model_free(model: *mut NcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hex SHA-256 of the model; free with `nc_string_free`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_model_hash(model: *const NcModel) -> *mut c_char {
    match model.as_ref() {
        Some(m) => into_c_string(m.model.model_hash()),
        None => {
            set_error("model is null");
            ptr::null_mut()
        }
    }
}

/// Coefficients as JSON; free with `nc_string_free`.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_model_params_json(model: *const NcModel) -> *mut c_char {
    match model.as_ref() {
        Some(m) => into_c_string(serde_json::to_string(&m.params).unwrap_or_default()),
        None => {
            set_error("model is null");
            ptr::null_mut()
        }
    }
}

/// `NC_STATUS_OK` if both design assumptions hold, `NC_STATUS_ASSUMPTION`
/// with the failing checks in the error message otherwise.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_check_assumptions(model: *const NcModel) -> NcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        check_assumptions(&m.model)
    })
}

/// Synthesizes gains for the initial state `x0[0..n]` with default solver
/// options.
///
/// # Safety
/// `model` must be a live handle, `x0` must point to `n` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn nc_synthesize(
    model: *const NcModel,
    x0: *const f64,
    n: usize,
    out: *mut *mut NcSolution,
) -> NcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if x0.is_null() {
            return Err(null("x0"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = std::slice::from_raw_parts(x0, n);
        check_assumptions(&m.model)?;
        let inner = synthesize(&m.model, x0, &SynthesisOptions::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(NcSolution { inner }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_free(solution: *mut NcSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Writes `[V1(x0), V2(x0)]` to `out[0..2]`.
///
/// # Safety
/// `solution` must be a live handle and `out` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_costs(solution: *const NcSolution, out: *mut f64) -> NcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(s.inner.costs.as_ptr(), out, 2);
        Ok(())
    })
}

/// Copies gain `player` (1 or 2) row-major into `out[0..len]`; `len` must
/// equal the gain's size, which `nc_solution_gain_len` reports.
///
/// # Safety
/// `solution` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_gain(
    solution: *const NcSolution,
    player: u32,
    out: *mut f64,
    len: usize,
) -> NcStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        let k = gain(s, player)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != k.as_slice().len() {
            return Err((
                NcStatus::InvalidArgument,
                format!("gain has {} entries, buffer {len}", k.as_slice().len()),
            ));
        }
        ptr::copy_nonoverlapping(k.as_slice().as_ptr(), out, len);
        Ok(())
    })
}

/// Number of entries of gain `player`, or 0 on error.
///
/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_gain_len(solution: *const NcSolution, player: u32) -> usize {
    solution
        .as_ref()
        .and_then(|s| gain(s, player).ok())
        .map_or(0, |k| k.as_slice().len())
}

fn gain(s: &NcSolution, player: u32) -> Result<&nashcost::linalg::Matrix, (NcStatus, String)> {
    match player {
        1 => Ok(&s.inner.k1),
        2 => Ok(&s.inner.k2),
        _ => Err((
            NcStatus::InvalidArgument,
            format!("player must be 1 or 2, got {player}"),
        )),
    }
}

/// Closed-loop spectral radius, or NaN for a null handle.
///
/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_spectral_radius(solution: *const NcSolution) -> f64 {
    solution
        .as_ref()
        .map_or(f64::NAN, |s| s.inner.closed_loop_spectral_radius)
}

/// Re-checks the certificate against `model`; `*valid` is set to whether
/// every check passes with at least `margin`. A solution for a different
/// model gives `NC_STATUS_STALE_SOLUTION`.
///
/// # Safety
/// Handles must be live and `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_verify(
    model: *const NcModel,
    solution: *const NcSolution,
    margin: f64,
    valid: *mut bool,
) -> NcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if valid.is_null() {
            return Err(null("valid"));
        }
        let report = s.inner.verify(&m.model, margin).map_err(fail)?;
        *valid = report.valid();
        Ok(())
    })
}

/// Solution as JSON; free with `nc_string_free`.
///
/// # Safety
/// `solution` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_to_json(solution: *const NcSolution) -> *mut c_char {
    match solution.as_ref() {
        Some(s) => match serde_json::to_string(&s.inner) {
            Ok(j) => into_c_string(j),
            Err(e) => {
                set_error(e.to_string());
                ptr::null_mut()
            }
        },
        None => {
            set_error("solution is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nc_solution_from_json(
    json: *const c_char,
    out: *mut *mut NcSolution,
) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let inner: GuaranteedSolution = serde_json::from_str(text).map_err(|e| fail(e.into()))?;
        *out = Box::into_raw(Box::new(NcSolution { inner }));
        Ok(())
    })
}
