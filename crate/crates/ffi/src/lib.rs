//! C ABI over blab-core.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Every fallible call returns a `BlabStatus`;
//! on failure the message is available from `blab_last_error_message` on the
//! same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use blab_core::bubble::{bubble_eval, Dimension};
use blab_core::config::{Command, RunConfig};
use blab_core::error::BlabError;
use blab_core::moments::moment_closed;
use blab_core::report::{summary_json, write_all, Outcome};
use blab_core::suites;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlabCommand {
    VerifyIdentities = 0,
    FitExpansion = 1,
    Reduce = 2,
    Continuation = 3,
}

impl From<BlabCommand> for Command {
    fn from(c: BlabCommand) -> Self {
        match c {
            BlabCommand::VerifyIdentities => Command::VerifyIdentities,
            BlabCommand::FitExpansion => Command::FitExpansion,
            BlabCommand::Reduce => Command::Reduce,
            BlabCommand::Continuation => Command::Continuation,
        }
    }
}

/// A validated run configuration.
pub struct BlabConfig {
    inner: RunConfig,
}

/// The checks and artifacts of one run, with the config and seed that produced them.
pub struct BlabOutcome {
    outcome: Outcome,
    config: RunConfig,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &BlabError) -> BlabStatus {
    match e {
        BlabError::Config(_) => BlabStatus::Config,
        BlabError::Io(_) => BlabStatus::Io,
        _ => BlabStatus::Numerical,
    }
}

fn fail(status: BlabStatus, msg: &str) -> BlabStatus {
    set_error(msg);
    status
}

/// Run `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (BlabStatus, String)>>(f: F) -> BlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlabStatus::Ok,
        Ok(Err((s, msg))) => fail(s, &msg),
        Err(_) => fail(BlabStatus::Panic, "internal panic"),
    }
}

fn core_err(e: BlabError) -> (BlabStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BlabStatus, String)> {
    if p.is_null() {
        return Err((BlabStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (BlabStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn null(what: &str) -> (BlabStatus, String) {
    (BlabStatus::NullPointer, format!("{what} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn blab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn blab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parse and validate a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn blab_config_parse(toml: *const c_char, out: *mut *mut BlabConfig) -> BlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(toml, "toml")?;
        let inner = RunConfig::from_toml(text).map_err(core_err)?;
        *out = Box::into_raw(Box::new(BlabConfig { inner }));
        Ok(())
    })
}

/// Read, parse and validate a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn blab_config_load(path: *const c_char, out: *mut *mut BlabConfig) -> BlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = str_arg(path, "path")?;
        let inner = RunConfig::load(Path::new(p)).map_err(core_err)?;
        *out = Box::into_raw(Box::new(BlabConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `blab_config_parse`/`blab_config_load` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn blab_config_free(cfg: *mut BlabConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run one command. A run whose checks fail still returns `Ok`; query
/// `blab_outcome_passed` for the verdict.
///
/// # Safety
/// `cfg` must be a live config handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn blab_run(cfg: *const BlabConfig, command: BlabCommand, seed: u64, out: *mut *mut BlabOutcome) -> BlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let outcome = suites::run(command.into(), &cfg.inner, seed).map_err(core_err)?;
        *out = Box::into_raw(Box::new(BlabOutcome {
            outcome,
            config: cfg.inner.clone(),
            seed,
        }));
        Ok(())
    })
}

/// # Safety
/// `outcome` must be a live outcome handle and `passed` writable.
#[no_mangle]
pub unsafe extern "C" fn blab_outcome_passed(outcome: *const BlabOutcome, passed: *mut bool) -> BlabStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| null("outcome"))?;
        let p = passed.as_mut().ok_or_else(|| null("passed"))?;
        *p = o.outcome.pass();
        Ok(())
    })
}

/// Number of checks and how many of them failed.
///
/// # Safety
/// `outcome` must be a live outcome handle; `total` and `failed` writable.
#[no_mangle]
pub unsafe extern "C" fn blab_outcome_counts(outcome: *const BlabOutcome, total: *mut usize, failed: *mut usize) -> BlabStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| null("outcome"))?;
        let t = total.as_mut().ok_or_else(|| null("total"))?;
        let f = failed.as_mut().ok_or_else(|| null("failed"))?;
        *t = o.outcome.checks.len();
        *f = o.outcome.failures().len();
        Ok(())
    })
}

/// The JSON summary as a new string; release it with `blab_string_free`.
///
/// # Safety
/// `outcome` must be a live outcome handle and `json` writable.
#[no_mangle]
pub unsafe extern "C" fn blab_outcome_summary_json(outcome: *const BlabOutcome, json: *mut *mut c_char) -> BlabStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| null("outcome"))?;
        if json.is_null() {
            return Err(null("json"));
        }
        let s = summary_json(&o.outcome, &o.config, o.seed).map_err(core_err)?;
        let c = CString::new(s).map_err(|_| (BlabStatus::Numerical, "summary contains NUL".to_string()))?;
        *json = c.into_raw();
        Ok(())
    })
}

/// Write summary.json, CSV tables and SVG plots into `dir`.
///
/// # Safety
/// `outcome` must be a live outcome handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn blab_outcome_write(outcome: *const BlabOutcome, dir: *const c_char) -> BlabStatus {
    guard(|| {
        let o = outcome.as_ref().ok_or_else(|| null("outcome"))?;
        let d = str_arg(dir, "dir")?;
        write_all(Path::new(d), &o.outcome, &o.config, o.seed).map_err(core_err)
    })
}

/// # Safety
/// `outcome` must come from `blab_run` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn blab_outcome_free(outcome: *mut BlabOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn blab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The standard bubble U(z) in dimension m, with z of length m.
///
/// # Safety
/// `z` must point to `len` doubles and `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_bubble_eval(m: usize, z: *const f64, len: usize, value: *mut f64) -> BlabStatus {
    guard(|| {
        if z.is_null() {
            return Err(null("z"));
        }
        let v = value.as_mut().ok_or_else(|| null("value"))?;
        let m = Dimension::new(m).map_err(core_err)?;
        *v = bubble_eval(m, std::slice::from_raw_parts(z, len)).map_err(core_err)?;
        Ok(())
    })
}

/// I^q_p = int_0^inf r^q (1 + r)^(-p) dr in closed form.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn blab_moment(p: f64, q: f64, value: *mut f64) -> BlabStatus {
    guard(|| {
        let v = value.as_mut().ok_or_else(|| null("value"))?;
        *v = moment_closed(p, q).map_err(core_err)?;
        Ok(())
    })
}
