//! C ABI over the emergence library.
//!
//! Every fallible call returns an [`EmStatus`]; on failure the message is
//! kept per thread and can be fetched with [`em_last_error`]. Strings handed
//! out by this library must be released with [`em_string_free`]; handles
//! with their matching `*_free`.
//!
//! Array outputs use caller buffers: pass `out`, its capacity, and
//! `out_len`. The required length is always written to `out_len`; if it
//! exceeds the capacity nothing else is written and
//! `EM_STATUS_BUFFER_TOO_SMALL` is returned, so a first call with capacity 0
//! sizes the buffer.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use emergence::agent_detect::score_trace;
use emergence::agent_model::AgentModel;
use emergence::dyngraph::AgentTrace;
use emergence::evalkit::{covering, f1_at_tolerance, label_offline, Segmentation};
use emergence::simkit::{simulate, SimConfig};
use emergence::system_model::detect_change_points;
use emergence::tensorkit::cosine_dissim;
use emergence::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    InputShape = 4,
    EmptySet = 5,
    DegenerateInput = 6,
    TrainingDivergence = 7,
    Config = 8,
    CacheInvalid = 9,
    Infeasible = 10,
    Dependency = 11,
    Invariant = 12,
    Trace = 13,
    Io = 14,
    Json = 15,
    Panic = 16,
}

impl From<&Error> for EmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InputShape(_) => EmStatus::InputShape,
            Error::EmptySet(_) => EmStatus::EmptySet,
            Error::DegenerateInput(_) => EmStatus::DegenerateInput,
            Error::TrainingDivergence(_) => EmStatus::TrainingDivergence,
            Error::Config(_) => EmStatus::Config,
            Error::CacheInvalid { .. } => EmStatus::CacheInvalid,
            Error::Infeasible(_) => EmStatus::Infeasible,
            Error::Dependency { .. } => EmStatus::Dependency,
            Error::Invariant(_) => EmStatus::Invariant,
            Error::Trace(_) => EmStatus::Trace,
            Error::Io { .. } => EmStatus::Io,
            Error::Json(_) => EmStatus::Json,
        }
    }
}

/// A recorded simulation run.
pub struct EmTrace(AgentTrace);

/// A trained agent-level model.
pub struct EmAgentModel(AgentModel);

/// Tolerance F1 of a detection set. `recall` is NaN when there is no truth.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmF1Report {
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

struct Failure(EmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(EmStatus::from(&e), e.to_string())
    }
}

fn fail(status: EmStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `body`, records any error or panic for `em_last_error`, and maps it
/// to a status.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EmStatus {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(fail(EmStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EmStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
            status
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(EmStatus::NullPointer, "null input array with non-zero length"));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or point to a live value of `T`.
unsafe fn reference<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| fail(EmStatus::NullPointer, format!("null {what}")))
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(fail(EmStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(EmStatus::InvalidArgument, "string is not UTF-8"))
}

/// # Safety
/// `out` must be null or valid for `cap` writes; `out_len` must be valid.
unsafe fn write_array<T: Copy>(values: &[T], out: *mut T, cap: usize, out_len: *mut usize) -> Result<(), Failure> {
    if out_len.is_null() {
        return Err(fail(EmStatus::NullPointer, "null out_len"));
    }
    *out_len = values.len();
    if values.len() > cap {
        return Err(fail(
            EmStatus::BufferTooSmall,
            format!("need room for {} values, capacity is {cap}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(fail(EmStatus::NullPointer, "null output array"));
        }
        std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

/// # Safety
/// `out` must be null or valid for one write.
unsafe fn write_one<T>(value: T, out: *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(EmStatus::NullPointer, "null output pointer"));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn em_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The caller owns
/// the returned string.
#[no_mangle]
pub extern "C" fn em_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        Some(msg) => CString::new(msg.replace('\0', " ")).map_or(std::ptr::null_mut(), CString::into_raw),
        None => std::ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Falling edges of `scores` through `c`: index `i + 1` for every
/// `scores[i] > c >= scores[i + 1]`.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn em_detect_change_points(
    scores: *const f64,
    len: usize,
    c: f64,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> EmStatus {
    guard(|| {
        let points = detect_change_points(slice(scores, len)?, c);
        write_array(&points, out, cap, out_len)
    })
}

/// # Safety
/// Pointers must be valid for the given lengths; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn em_f1_at_tolerance(
    truth: *const usize,
    n_truth: usize,
    detected: *const usize,
    n_detected: usize,
    theta: usize,
    out: *mut EmF1Report,
) -> EmStatus {
    guard(|| {
        let r = f1_at_tolerance(slice(truth, n_truth)?, slice(detected, n_detected)?, theta);
        write_one(
            EmF1Report { tp: r.tp, fp: r.fp, precision: r.precision, recall: r.recall.unwrap_or(f64::NAN), f1: r.f1 },
            out,
        )
    })
}

/// Covering of the detected segmentation by the true one, both over
/// `len` steps and given as sorted change points inside `(0, len)`.
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn em_covering(
    len: usize,
    truth: *const usize,
    n_truth: usize,
    detected: *const usize,
    n_detected: usize,
    out: *mut f64,
) -> EmStatus {
    guard(|| {
        let t = Segmentation::new(len, slice(truth, n_truth)?.to_vec())?;
        let d = Segmentation::new(len, slice(detected, n_detected)?.to_vec())?;
        write_one(covering(&t, &d)?, out)
    })
}

/// Exact least-squares segmentation of `series` into `k + 1` pieces.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn em_label_offline(
    series: *const f64,
    len: usize,
    k: usize,
    out: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> EmStatus {
    guard(|| {
        let points = label_offline(slice(series, len)?, k)?;
        write_array(&points, out, cap, out_len)
    })
}

/// `(1 - cos(u, v)) / 2`.
///
/// # Safety
/// `u` and `v` must be valid for `dim` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn em_cosine_dissim(u: *const f64, v: *const f64, dim: usize, out: *mut f64) -> EmStatus {
    guard(|| write_one(cosine_dissim(slice(u, dim)?, slice(v, dim)?)?, out))
}

/// Reads a JSONL trace file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn em_trace_load(path: *const c_char, out: *mut *mut EmTrace) -> EmStatus {
    guard(|| {
        let trace = AgentTrace::read_jsonl(Path::new(text(path)?))?;
        write_one(Box::into_raw(Box::new(EmTrace(trace))), out)
    })
}

/// Runs the simulator from a JSON simulator config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn em_trace_simulate(config_json: *const c_char, out: *mut *mut EmTrace) -> EmStatus {
    guard(|| {
        let config: SimConfig = serde_json::from_str(text(config_json)?).map_err(Error::from)?;
        let trace = simulate(&config)?;
        write_one(Box::into_raw(Box::new(EmTrace(trace))), out)
    })
}

/// Writes the trace as JSONL.
///
/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn em_trace_save(trace: *const EmTrace, path: *const c_char) -> EmStatus {
    guard(|| {
        let t = reference(trace, "trace")?;
        t.0.write_jsonl(Path::new(text(path)?))?;
        Ok(())
    })
}

/// Recorded steps and agent count.
///
/// # Safety
/// `trace` must be a live handle; outputs valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn em_trace_shape(trace: *const EmTrace, steps: *mut usize, agents: *mut usize) -> EmStatus {
    guard(|| {
        let t = reference(trace, "trace")?;
        write_one(t.0.len(), steps)?;
        write_one(t.0.n_agents(), agents)
    })
}

/// The objective measure, one value per evaluation step.
///
/// # Safety
/// `trace` must be a live handle; `out` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn em_trace_objective(trace: *const EmTrace, out: *mut f64, cap: usize, out_len: *mut usize) -> EmStatus {
    guard(|| {
        let t = reference(trace, "trace")?;
        write_array(&t.0.header.objective, out, cap, out_len)
    })
}

/// # Safety
/// `trace` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_trace_free(trace: *mut EmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Loads an agent model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn em_agent_model_load(path: *const c_char, out: *mut *mut EmAgentModel) -> EmStatus {
    guard(|| {
        let model = AgentModel::load(Path::new(text(path)?))?;
        write_one(Box::into_raw(Box::new(EmAgentModel(model))), out)
    })
}

/// Per-agent scores over the trace, row-major `steps × agents`.
///
/// # Safety
/// Handles must be live; `out` valid for `cap` writes.
#[no_mangle]
pub unsafe extern "C" fn em_agent_model_score(
    model: *const EmAgentModel,
    trace: *const EmTrace,
    alpha: f64,
    seed: u64,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> EmStatus {
    guard(|| {
        let m = reference(model, "agent model")?;
        let t = reference(trace, "trace")?;
        let series = score_trace(&m.0, &t.0, alpha, None, seed)?;
        let flat: Vec<f64> = series.scores.into_iter().flatten().collect();
        write_array(&flat, out, cap, out_len)
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn em_agent_model_free(model: *mut EmAgentModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
