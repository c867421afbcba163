//! C ABI over the `camuv` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`CamuvStatus`]; on failure, [`camuv_last_error`] describes the error
//! for the calling thread. Strings returned through `char **` out-parameters
//! are released with [`camuv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use camuv::graph::default_names;
use camuv::kernel::hsic_pvalue_gamma;
use camuv::{CausalGraph, Dataset, DiscoveryConfig, Error, LagGraph, PriorKnowledge};
use ndarray::{Array2, ArrayView2};

/// Result of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamuvStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Arguments or data were rejected.
    InvalidInput = 3,
    /// File could not be read or written.
    Io = 4,
    /// CSV or JSON could not be parsed.
    Parse = 5,
    /// Data too degenerate to analyze (for example a constant column).
    Degenerate = 6,
    /// Internal failure inside the library.
    Internal = 7,
    /// A panic was caught at the boundary.
    Panic = 8,
}

pub struct CamuvDataset(Dataset);
pub struct CamuvPrior(PriorKnowledge);
pub struct CamuvGraph(CausalGraph);
pub struct CamuvLagGraph(LagGraph);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CamuvStatus {
    match e {
        Error::Io(_) => CamuvStatus::Io,
        Error::Csv(_) | Error::Json(_) => CamuvStatus::Parse,
        Error::DegenerateSample(_) => CamuvStatus::Degenerate,
        Error::Watchdog { .. } | Error::Linalg(_) | Error::Invariant(_) => CamuvStatus::Internal,
        _ => CamuvStatus::InvalidInput,
    }
}

struct Fail(CamuvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CamuvStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CamuvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CamuvStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            CamuvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CamuvStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let c = CString::new(s).map_err(|_| Fail(CamuvStatus::Internal, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn config(alpha: f64, max_subset: usize) -> DiscoveryConfig {
    DiscoveryConfig::new(alpha, max_subset)
}

/// Message for the most recent failure on this thread, or null if none.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn camuv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn camuv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Reads a CSV file with a header row of variable names.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_dataset_from_csv(path: *const c_char, out: *mut *mut CamuvDataset) -> CamuvStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let file = std::fs::File::open(path).map_err(Error::from)?;
        put(out, CamuvDataset(Dataset::read_csv(file)?))
    })
}

/// Builds a dataset from a row-major `n_rows * n_cols` buffer. `names` may be
/// null, in which case columns are named `X1..Xp`.
///
/// # Safety
/// `values` must point to `n_rows * n_cols` doubles; `names`, if non-null, to
/// `n_cols` NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_dataset_from_rows(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    names: *const *const c_char,
    out: *mut *mut CamuvDataset,
) -> CamuvStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| Fail(CamuvStatus::InvalidInput, "dataset size overflows".into()))?;
        let data = std::slice::from_raw_parts(values, len).to_vec();
        let names = if names.is_null() {
            default_names(n_cols)
        } else {
            (0..n_cols)
                .map(|j| str_arg(*names.add(j), "column name").map(str::to_string))
                .collect::<Result<_, _>>()?
        };
        let arr = Array2::from_shape_vec((n_rows, n_cols), data)
            .map_err(|e| Fail(CamuvStatus::InvalidInput, e.to_string()))?;
        put(out, CamuvDataset(Dataset::new(names, arr)?))
    })
}

/// # Safety
/// `d` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn camuv_dataset_n_samples(d: *const CamuvDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_samples())
}

/// # Safety
/// `d` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn camuv_dataset_n_vars(d: *const CamuvDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_vars())
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_dataset_free(d: *mut CamuvDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Empty prior knowledge over the variables of `data`.
///
/// # Safety
/// `data` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_prior_new(data: *const CamuvDataset, out: *mut *mut CamuvPrior) -> CamuvStatus {
    guard(|| {
        let d = handle(data, "dataset")?;
        put(out, CamuvPrior(PriorKnowledge::empty(d.0.names())))
    })
}

/// Parses `{"forbidden": [[cause, effect], ...]}` over the variables of `data`.
///
/// # Safety
/// `json` must be NUL-terminated; `data` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_prior_from_json(
    json: *const c_char,
    data: *const CamuvDataset,
    out: *mut *mut CamuvPrior,
) -> CamuvStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let d = handle(data, "dataset")?;
        put(out, CamuvPrior(PriorKnowledge::from_json(json, d.0.names())?))
    })
}

/// Asserts that `cause` is not a direct cause of `effect`.
///
/// # Safety
/// `prior` must be a live handle; names must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn camuv_prior_forbid(
    prior: *mut CamuvPrior,
    cause: *const c_char,
    effect: *const c_char,
) -> CamuvStatus {
    guard(|| {
        let p = prior.as_mut().ok_or_else(|| null("prior"))?;
        p.0.forbid(str_arg(cause, "cause")?, str_arg(effect, "effect")?)?;
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_prior_free(p: *mut CamuvPrior) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Runs discovery. `prior` may be null.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_discover(
    data: *const CamuvDataset,
    prior: *const CamuvPrior,
    alpha: f64,
    max_subset: usize,
    out: *mut *mut CamuvGraph,
) -> CamuvStatus {
    guard(|| {
        let d = handle(data, "dataset")?;
        let mut cfg = config(alpha, max_subset);
        if let Some(p) = prior.as_ref() {
            cfg = cfg.with_prior(p.0.clone());
        }
        put(out, CamuvGraph(camuv::discover(&d.0, &cfg)?))
    })
}

/// Number of directed edges.
///
/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_n_directed(g: *const CamuvGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.directed.len())
}

/// Number of dashed (latent-connected) pairs.
///
/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_n_dashed(g: *const CamuvGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.dashed.len())
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_to_json(g: *const CamuvGraph, out: *mut *mut c_char) -> CamuvStatus {
    guard(|| put_string(out, handle(g, "graph")?.0.to_json()?))
}

/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_to_dot(g: *const CamuvGraph, out: *mut *mut c_char) -> CamuvStatus {
    guard(|| put_string(out, handle(g, "graph")?.0.to_dot()))
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_free(g: *mut CamuvGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Time-series discovery over lags `0..=max_lag`; rows of `data` are time
/// points in order.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_discover_ts(
    data: *const CamuvDataset,
    max_lag: usize,
    alpha: f64,
    max_subset: usize,
    out: *mut *mut CamuvLagGraph,
) -> CamuvStatus {
    guard(|| {
        let d = handle(data, "dataset")?;
        put(out, CamuvLagGraph(camuv::discover_ts(&d.0, max_lag, alpha, max_subset, None)?))
    })
}

/// Number of lagged directed edges.
///
/// # Safety
/// `g` must be a live lag-graph handle.
#[no_mangle]
pub unsafe extern "C" fn camuv_lag_graph_n_edges(g: *const CamuvLagGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edges.len())
}

/// # Safety
/// `g` must be a live lag-graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_lag_graph_to_json(g: *const CamuvLagGraph, out: *mut *mut c_char) -> CamuvStatus {
    guard(|| put_string(out, handle(g, "lag graph")?.0.to_json()?))
}

/// # Safety
/// `g` must be a live lag-graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_lag_graph_to_dot(g: *const CamuvLagGraph, out: *mut *mut c_char) -> CamuvStatus {
    guard(|| put_string(out, handle(g, "lag graph")?.0.to_dot()))
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_lag_graph_free(g: *mut CamuvLagGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Gamma-approximation HSIC p-value for two samples of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` doubles; `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn camuv_hsic_pvalue(x: *const f64, y: *const f64, n: usize, p_value: *mut f64) -> CamuvStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("sample"));
        }
        if p_value.is_null() {
            return Err(null("output pointer"));
        }
        let xv = ArrayView2::from_shape((n, 1), std::slice::from_raw_parts(x, n))
            .map_err(|e| Fail(CamuvStatus::InvalidInput, e.to_string()))?;
        let yv = ArrayView2::from_shape((n, 1), std::slice::from_raw_parts(y, n))
            .map_err(|e| Fail(CamuvStatus::InvalidInput, e.to_string()))?;
        *p_value = hsic_pvalue_gamma(xv, yv)?.p_value;
        Ok(())
    })
}
