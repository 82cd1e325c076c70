//! C ABI over `wcfg`.
//!
//! Objects cross the boundary as opaque heap handles created by a
//! `*_parse` or `*_full` function and released by the matching `*_free`.
//! Every fallible call returns a [`WcfgStatus`]; on anything but
//! `WCFG_STATUS_OK` or `WCFG_STATUS_INFEASIBLE` a message is available from
//! [`wcfg_last_error`] on the calling thread until its next failing call.
//! Strings returned by the library are owned by the caller and released with
//! [`wcfg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use wcfg::cp::{solve_min, Backend, SolveOptions};
use wcfg::schedule::{build_schedule_model, ScheduleInstance};
use wcfg::{DomainStore, Propagation, Terminal, WeightedGrammar};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcfgStatus {
    Ok = 0,
    /// The constraint has no solution; not an error.
    Infeasible = 1,
    NullPointer = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcfgBackend {
    Monolithic = 0,
    Decomposition = 1,
    DecompositionWithEntailment = 2,
}

impl From<WcfgBackend> for Backend {
    fn from(b: WcfgBackend) -> Self {
        match b {
            WcfgBackend::Monolithic => Backend::Monolithic,
            WcfgBackend::Decomposition => Backend::Decomposition,
            WcfgBackend::DecompositionWithEntailment => Backend::DecompositionWithEntailment,
        }
    }
}

/// Opaque grammar handle.
pub struct WcfgGrammar(WeightedGrammar);

/// Opaque domain store handle.
pub struct WcfgDomains(DomainStore);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: WcfgStatus, message: impl Into<String>) -> WcfgStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> WcfgStatus) -> WcfgStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(WcfgStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, WcfgStatus> {
    if s.is_null() {
        return Err(fail(WcfgStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(WcfgStatus::InvalidUtf8, "argument is not UTF-8"))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wcfg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wcfg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a grammar in the text format.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wcfg_grammar_parse(source: *const c_char, out: *mut *mut WcfgGrammar) -> WcfgStatus {
    guard(|| {
        if out.is_null() {
            return fail(WcfgStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let source = try_ffi!(text(source));
        let g = match WeightedGrammar::parse(source).map_err(|e| e.to_string()).and_then(|g| g.checked().map_err(|e| e.to_string())) {
            Ok(g) => g,
            Err(e) => return fail(WcfgStatus::Parse, e),
        };
        *out = Box::into_raw(Box::new(WcfgGrammar(g)));
        WcfgStatus::Ok
    })
}

/// # Safety
/// `grammar` must come from [`wcfg_grammar_parse`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wcfg_grammar_free(grammar: *mut WcfgGrammar) {
    if !grammar.is_null() {
        drop(Box::from_raw(grammar));
    }
}

/// Alphabet size, or 0 for a null handle.
///
/// # Safety
/// `grammar` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcfg_grammar_num_terminals(grammar: *const WcfgGrammar) -> usize {
    grammar.as_ref().map_or(0, |g| g.0.num_terminals())
}

/// The grammar in the text format; free with [`wcfg_string_free`].
///
/// # Safety
/// `grammar` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcfg_grammar_to_string(grammar: *const WcfgGrammar) -> *mut c_char {
    grammar.as_ref().map_or(ptr::null_mut(), |g| owned_string(g.0.to_string()))
}

/// Full domains of length `n` over the grammar alphabet.
///
/// # Safety
/// `grammar` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_full(grammar: *const WcfgGrammar, n: usize, out: *mut *mut WcfgDomains) -> WcfgStatus {
    guard(|| {
        let (Some(g), false) = (grammar.as_ref(), out.is_null()) else {
            return fail(WcfgStatus::NullPointer, "null argument");
        };
        *out = Box::into_raw(Box::new(WcfgDomains(DomainStore::full(n, g.0.num_terminals()))));
        WcfgStatus::Ok
    })
}

/// Parses a domains file (`X<i>: a b c` per line) against the grammar
/// alphabet.
///
/// # Safety
/// `grammar` must be a live handle, `source` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_parse(
    grammar: *const WcfgGrammar,
    source: *const c_char,
    out: *mut *mut WcfgDomains,
) -> WcfgStatus {
    guard(|| {
        let (Some(g), false) = (grammar.as_ref(), out.is_null()) else {
            return fail(WcfgStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        let source = try_ffi!(text(source));
        match DomainStore::parse(source, &g.0.symbols) {
            Ok(d) => {
                *out = Box::into_raw(Box::new(WcfgDomains(d)));
                WcfgStatus::Ok
            }
            Err(e) => fail(WcfgStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `domains` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_free(domains: *mut WcfgDomains) {
    if !domains.is_null() {
        drop(Box::from_raw(domains));
    }
}

/// Sequence length, or 0 for a null handle.
///
/// # Safety
/// `domains` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_len(domains: *const WcfgDomains) -> usize {
    domains.as_ref().map_or(0, |d| d.0.len())
}

/// 1 if terminal `t` is in `D(X_i)`, `i` in `1..=len`, else 0.
///
/// # Safety
/// `domains` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_contains(domains: *const WcfgDomains, i: usize, t: u16) -> i32 {
    match domains.as_ref() {
        Some(d) if (1..=d.0.len()).contains(&i) && t < 64 => i32::from(d.0.get(i).contains(Terminal(t))),
        _ => 0,
    }
}

/// Domains rendered as `X1={a} X2={b}`; free with [`wcfg_string_free`].
///
/// # Safety
/// Both handles must be null or live.
#[no_mangle]
pub unsafe extern "C" fn wcfg_domains_to_string(domains: *const WcfgDomains, grammar: *const WcfgGrammar) -> *mut c_char {
    match (domains.as_ref(), grammar.as_ref()) {
        (Some(d), Some(g)) => owned_string(d.0.display(&g.0.symbols).to_string()),
        _ => ptr::null_mut(),
    }
}

/// Enforces `WCFG(grammar, z)` on `domains`. On `WCFG_STATUS_OK` the pruned
/// domains are written to `out` (a new handle) and the minimum derivation
/// weight to `root_min` when non-null. `WCFG_STATUS_INFEASIBLE` leaves `out`
/// null.
///
/// # Safety
/// Handles must be live; `out` must be valid; `root_min` may be null.
#[no_mangle]
pub unsafe extern "C" fn wcfg_propagate(
    grammar: *const WcfgGrammar,
    domains: *const WcfgDomains,
    z: i64,
    backend: WcfgBackend,
    out: *mut *mut WcfgDomains,
    root_min: *mut i64,
) -> WcfgStatus {
    guard(|| {
        let (Some(g), Some(d), false) = (grammar.as_ref(), domains.as_ref(), out.is_null()) else {
            return fail(WcfgStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        match Backend::from(backend).propagate(&g.0, z, &d.0) {
            Ok(Propagation::Pruned { domains, root_min: w }) => {
                if !root_min.is_null() {
                    *root_min = w;
                }
                *out = Box::into_raw(Box::new(WcfgDomains(domains)));
                WcfgStatus::Ok
            }
            Ok(Propagation::Infeasible) => WcfgStatus::Infeasible,
            Err(e) => fail(WcfgStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Minimizes a shift-scheduling instance given in the instance text format.
/// Writes the best cost to `cost` (when non-null) and the solver log to
/// `log` (when non-null; free with [`wcfg_string_free`]). A non-positive
/// `time_limit_s` uses the instance's own limit.
///
/// # Safety
/// `source` must be a NUL-terminated string; `cost` and `log` may be null.
#[no_mangle]
pub unsafe extern "C" fn wcfg_solve_instance(
    source: *const c_char,
    backend: WcfgBackend,
    time_limit_s: f64,
    cost: *mut i64,
    log: *mut *mut c_char,
) -> WcfgStatus {
    guard(|| {
        if !log.is_null() {
            *log = ptr::null_mut();
        }
        let source = try_ffi!(text(source));
        let inst = match ScheduleInstance::parse(source) {
            Ok(i) => i,
            Err(e) => return fail(WcfgStatus::Parse, e.to_string()),
        };
        let model = match build_schedule_model(&inst, backend.into()) {
            Ok(m) => m,
            Err(e) => return fail(WcfgStatus::InvalidArgument, e.to_string()),
        };
        let seconds = if time_limit_s > 0.0 { time_limit_s } else { inst.time_limit };
        let Ok(limit) = Duration::try_from_secs_f64(seconds) else {
            return fail(WcfgStatus::InvalidArgument, format!("bad time limit {seconds}"));
        };
        let result = solve_min(&model.model, &SolveOptions { time_limit: Some(limit) });
        if !log.is_null() {
            *log = owned_string(result.render());
        }
        match result.cost() {
            Some(c) => {
                if !cost.is_null() {
                    *cost = c;
                }
                WcfgStatus::Ok
            }
            None => WcfgStatus::Infeasible,
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn wcfg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
