//! C ABI for simcut.
//!
//! Instances live behind an opaque handle. Configurations go in and reports
//! come out as UTF-8 JSON strings; strings returned by the library must be
//! released with [`simcut_string_free`]. Every call returns a [`SimcutStatus`];
//! on failure the message is available from [`simcut_last_error`] on the same
//! thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::de::DeserializeOwned;
use simcut::cli::OracleReport;
use simcut::instance::{InstanceFile, SimInstance, DEFAULT_BRUTE_FORCE_CAP};
use simcut::pipeline::{self, PipelineConfig, SCHEMA_VERSION};
use simcut::prover::{self, ProverConfig};
use simcut::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimcutStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Infeasible = 4,
    ProverFailed = 5,
    Internal = 6,
    Panic = 7,
}

/// Opaque instance handle.
pub struct SimcutInstance {
    inner: SimInstance,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SimcutStatus {
    match e {
        Error::EmptyInstance(_)
        | Error::WeightBelowFloor { .. }
        | Error::MalformedInstance(_)
        | Error::TooLarge { .. }
        | Error::InvalidDistribution(_)
        | Error::InvalidParams(_)
        | Error::Parse(_) => SimcutStatus::InvalidInput,
        Error::AllFixingsInfeasible | Error::Infeasible { .. } => SimcutStatus::Infeasible,
        Error::BudgetExhausted { .. } | Error::Counterexample(_) => SimcutStatus::ProverFailed,
        _ => SimcutStatus::Internal,
    }
}

struct Failure(SimcutStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<SimcutStatus, Failure>) -> SimcutStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Failure(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            SimcutStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SimcutStatus::NullArgument, "null string argument".into()));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(SimcutStatus::InvalidUtf8, e.to_string()))
}

unsafe fn read_config<T: DeserializeOwned + Default>(p: *const c_char) -> Result<T, Failure> {
    if p.is_null() {
        return Ok(T::default());
    }
    let s = read_str(p)?;
    if s.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(s).map_err(|e| Failure(SimcutStatus::InvalidInput, format!("config: {e}")))
}

unsafe fn write_json<T: serde::Serialize>(value: &T, out: *mut *mut c_char) -> Result<(), Failure> {
    let text = serde_json::to_string(value).map_err(|e| Failure(SimcutStatus::Internal, e.to_string()))?;
    let c = CString::new(text).map_err(|e| Failure(SimcutStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(SimcutStatus::NullArgument, "null output pointer".into()));
    }
    Ok(())
}

unsafe fn instance<'a>(h: *const SimcutInstance) -> Result<&'a SimInstance, Failure> {
    h.as_ref().map(|h| &h.inner).ok_or_else(|| Failure(SimcutStatus::NullArgument, "null instance handle".into()))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn simcut_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn simcut_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses an instance from its JSON file layout (1-based vertices).
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn simcut_instance_from_json(json: *const c_char, out: *mut *mut SimcutInstance) -> SimcutStatus {
    guard(|| {
        check_out(out)?;
        *out = ptr::null_mut();
        let text = read_str(json)?;
        let file: InstanceFile = serde_json::from_str(text).map_err(Error::from)?;
        let inner = SimInstance::from_file(&file)?;
        *out = Box::into_raw(Box::new(SimcutInstance { inner }));
        Ok(SimcutStatus::Ok)
    })
}

/// Releases an instance handle. Null is ignored.
///
/// # Safety
/// `inst` must be null or a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn simcut_instance_free(inst: *mut SimcutInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Vertex count, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn simcut_instance_n(inst: *const SimcutInstance) -> usize {
    inst.as_ref().map_or(0, |h| h.inner.n())
}

/// Number of simultaneous instances, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn simcut_instance_k(inst: *const SimcutInstance) -> usize {
    inst.as_ref().map_or(0, |h| h.inner.k())
}

/// Runs the full pipeline. `config_json` may be null or partial; missing
/// fields take their defaults. The run report is written to `out_json` also
/// when the status is `Infeasible`.
///
/// # Safety
/// Pointers must be valid; `out_json` receives a string owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn simcut_solve(inst: *const SimcutInstance, config_json: *const c_char, out_json: *mut *mut c_char) -> SimcutStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = ptr::null_mut();
        let inst = instance(inst)?;
        let cfg: PipelineConfig = read_config(config_json)?;
        cfg.validate()?;
        let report = pipeline::run_full(inst, &cfg)?;
        write_json(&report, out_json)?;
        if report.chosen.is_none() {
            set_error(Error::AllFixingsInfeasible.to_string());
            return Ok(SimcutStatus::Infeasible);
        }
        Ok(SimcutStatus::Ok)
    })
}

/// Exact simultaneous optimum by enumeration. `cap` bounds `n`; 0 uses the
/// default.
///
/// # Safety
/// Pointers must be valid; `out_json` receives a string owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn simcut_oracle(inst: *const SimcutInstance, cap: usize, out_json: *mut *mut c_char) -> SimcutStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = ptr::null_mut();
        let inst = instance(inst)?;
        let cap = if cap == 0 { DEFAULT_BRUTE_FORCE_CAP } else { cap };
        let (f, report) = inst.brute_force_opt(cap)?;
        let out = OracleReport { schema_version: SCHEMA_VERSION, n: inst.n(), k: inst.k(), assignment: f.0, report };
        write_json(&out, out_json)?;
        Ok(SimcutStatus::Ok)
    })
}

/// Runs the ratio prover. `config_json` may be null or partial. The
/// certificate is written to `out_json` for every verdict; the status is
/// `ProverFailed` unless the bound was proved.
///
/// # Safety
/// Pointers must be valid; `out_json` receives a string owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn simcut_prove(config_json: *const c_char, out_json: *mut *mut c_char) -> SimcutStatus {
    guard(|| {
        check_out(out_json)?;
        *out_json = ptr::null_mut();
        let cfg: ProverConfig = read_config(config_json)?;
        let cert = prover::certify(&cfg)?;
        write_json(&cert, out_json)?;
        match cert.ensure_proved() {
            Ok(()) => Ok(SimcutStatus::Ok),
            Err(e) => {
                set_error(e.to_string());
                Ok(SimcutStatus::ProverFailed)
            }
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn simcut_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
