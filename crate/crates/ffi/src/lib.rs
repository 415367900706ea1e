//! C ABI over the signature synthesis and matching pipeline.
//!
//! Conventions: fallible calls return `SfStatus` and write out-parameters
//! only on success. Handles are opaque; release each with its `_free`
//! function. After a failure, `sf_last_error_message` returns a thread-local
//! description that stays valid until the next failing call on that thread.
//! Passing handles owned by another thread is safe as long as each handle is
//! used by one thread at a time.

use std::ffi::{c_char, c_int, CStr, CString};
use std::cell::RefCell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num::{BigRational, ToPrimitive};
use sigforge::matcher::{approx_match, exact_match, Cutoffs, MatchKind};
use sigforge::model::{
    iccg_from_json, iccg_to_json, load_iccg, load_signature, save_signature, Iccg, Signature,
};
use sigforge::synth::infer_signature;
use sigforge::weights::{compute_weights, load_weights, WeightTable};
use sigforge::SigError;

/// Opaque handle to a component graph.
pub struct SfIccg {
    inner: Iccg,
}

/// Opaque handle to a metadata weight table.
pub struct SfWeights {
    inner: WeightTable,
}

/// Opaque handle to a synthesized family signature.
pub struct SfSignature {
    inner: Signature,
}

/// Status codes returned by every fallible function. `SF_STATUS_OK` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidGraph = 5,
    InvalidInput = 6,
    HardUnsat = 7,
    Overflow = 8,
    ZeroSignature = 9,
    TooLarge = 10,
    Internal = 11,
}

/// Verdict classes for approximate matching, weakest to strongest.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfMatchKind {
    NoMatch = 0,
    ZeroDayCandidate = 1,
    Obfuscated = 2,
    Exact = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).expect("NUL stripped");
    });
}

fn status_of(e: &SigError) -> SfStatus {
    match e {
        SigError::Io { .. } => SfStatus::Io,
        SigError::Parse { .. } => SfStatus::Parse,
        SigError::InvalidGraph { .. } => SfStatus::InvalidGraph,
        SigError::InvalidInput(_) => SfStatus::InvalidInput,
        SigError::HardUnsat(_) => SfStatus::HardUnsat,
        SigError::Overflow(_) => SfStatus::Overflow,
        SigError::ZeroSignature(_) => SfStatus::ZeroSignature,
        SigError::TooLarge(_) => SfStatus::TooLarge,
        SigError::Internal(_) => SfStatus::Internal,
    }
}

fn fail(e: &SigError) -> SfStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn null_arg(what: &str) -> SfStatus {
    set_error(&format!("{what} must not be null"));
    SfStatus::NullArgument
}

/// Runs `f`, converting panics into `SF_STATUS_INTERNAL` instead of
/// unwinding across the FFI boundary.
fn guarded(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SfStatus::Internal
        }
    }
}

unsafe fn cstr_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SfStatus> {
    if p.is_null() {
        return Err(null_arg(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{what} is not valid UTF-8"));
        SfStatus::InvalidUtf8
    })
}

unsafe fn handle_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, SfStatus> {
    if p.is_null() {
        Err(null_arg(what))
    } else {
        Ok(&*p)
    }
}

unsafe fn collect_graphs<'a>(
    ptrs: *const *const SfIccg,
    len: usize,
    what: &str,
) -> Result<Vec<Iccg>, SfStatus> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if ptrs.is_null() {
        return Err(null_arg(what));
    }
    let slice = std::slice::from_raw_parts(ptrs, len);
    let mut graphs = Vec::with_capacity(len);
    for (i, &p) in slice.iter().enumerate() {
        if p.is_null() {
            return Err(null_arg(&format!("{what}[{i}]")));
        }
        graphs.push((*p).inner.clone());
    }
    Ok(graphs)
}

/// Message describing the most recent failure on this thread. Empty string
/// when no failure occurred yet. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a component graph from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn sf_iccg_load(path: *const c_char, out: *mut *mut SfIccg) -> SfStatus {
    guarded(|| {
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return null_arg("out");
        }
        match load_iccg(Path::new(path)) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(SfIccg { inner: g }));
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Parses a component graph from JSON text.
#[no_mangle]
pub unsafe extern "C" fn sf_iccg_from_json(
    text: *const c_char,
    out: *mut *mut SfIccg,
) -> SfStatus {
    guarded(|| {
        let text = match cstr_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        if out.is_null() {
            return null_arg("out");
        }
        match iccg_from_json(text, "<memory>") {
            Ok(g) => {
                *out = Box::into_raw(Box::new(SfIccg { inner: g }));
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Serializes a graph to its canonical JSON text. Returns NULL on a null
/// handle. Free the returned string with `sf_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sf_iccg_to_json(graph: *const SfIccg) -> *mut c_char {
    let Ok(graph) = handle_arg(graph, "graph") else {
        return ptr::null_mut();
    };
    let json = iccg_to_json(&graph.inner).replace('\0', " ");
    CString::new(json).expect("NUL stripped").into_raw()
}

/// Number of vertices in the graph, including the system vertex. Returns 0
/// on a null handle.
#[no_mangle]
pub unsafe extern "C" fn sf_iccg_vertex_count(graph: *const SfIccg) -> usize {
    match handle_arg(graph, "graph") {
        Ok(g) => g.inner.vertex_count(),
        Err(_) => 0,
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_iccg_free(graph: *mut SfIccg) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Frees a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a weight table from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn sf_weights_load(
    path: *const c_char,
    out: *mut *mut SfWeights,
) -> SfStatus {
    guarded(|| {
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return null_arg("out");
        }
        match load_weights(Path::new(path)) {
            Ok(w) => {
                *out = Box::into_raw(Box::new(SfWeights { inner: w }));
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Computes inverse-frequency weights from `count` benign graphs. `benign`
/// may be NULL when `count` is 0, which yields the default table where every
/// label weighs 1.
#[no_mangle]
pub unsafe extern "C" fn sf_weights_compute(
    benign: *const *const SfIccg,
    count: usize,
    out: *mut *mut SfWeights,
) -> SfStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let graphs = match collect_graphs(benign, count, "benign") {
            Ok(g) => g,
            Err(s) => return s,
        };
        let table = compute_weights(&graphs);
        *out = Box::into_raw(Box::new(SfWeights { inner: table }));
        SfStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn sf_weights_free(weights: *mut SfWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// Loads a signature from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn sf_signature_load(
    path: *const c_char,
    out: *mut *mut SfSignature,
) -> SfStatus {
    guarded(|| {
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        if out.is_null() {
            return null_arg("out");
        }
        match load_signature(Path::new(path)) {
            Ok(sig) => {
                *out = Box::into_raw(Box::new(SfSignature { inner: sig }));
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Writes a signature to a JSON file.
#[no_mangle]
pub unsafe extern "C" fn sf_signature_save(
    signature: *const SfSignature,
    path: *const c_char,
) -> SfStatus {
    guarded(|| {
        let sig = match handle_arg(signature, "signature") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_signature(&sig.inner, Path::new(path)) {
            Ok(()) => SfStatus::Ok,
            Err(e) => fail(&e),
        }
    })
}

/// Returns a new handle to the signature's graph. Free it with
/// `sf_iccg_free`. Returns NULL on a null handle.
#[no_mangle]
pub unsafe extern "C" fn sf_signature_graph(signature: *const SfSignature) -> *mut SfIccg {
    match handle_arg(signature, "signature") {
        Ok(sig) => Box::into_raw(Box::new(SfIccg {
            inner: sig.inner.graph.clone(),
        })),
        Err(_) => ptr::null_mut(),
    }
}

/// 1 when the signature carries no structure (nothing beyond the system
/// vertex), 0 otherwise, -1 on a null handle.
#[no_mangle]
pub unsafe extern "C" fn sf_signature_is_empty(signature: *const SfSignature) -> c_int {
    match handle_arg(signature, "signature") {
        Ok(sig) => c_int::from(sig.inner.is_empty()),
        Err(_) => -1,
    }
}

#[no_mangle]
pub unsafe extern "C" fn sf_signature_free(signature: *mut SfSignature) {
    if !signature.is_null() {
        drop(Box::from_raw(signature));
    }
}

/// Synthesizes the family signature of `count` sample graphs under the given
/// weight table.
#[no_mangle]
pub unsafe extern "C" fn sf_infer_signature(
    samples: *const *const SfIccg,
    count: usize,
    weights: *const SfWeights,
    family: *const c_char,
    out: *mut *mut SfSignature,
) -> SfStatus {
    guarded(|| {
        let graphs = match collect_graphs(samples, count, "samples") {
            Ok(g) => g,
            Err(s) => return s,
        };
        let weights = match handle_arg(weights, "weights") {
            Ok(w) => w,
            Err(s) => return s,
        };
        let family = match cstr_arg(family, "family") {
            Ok(f) => f,
            Err(s) => return s,
        };
        if out.is_null() {
            return null_arg("out");
        }
        match infer_signature(&graphs, &weights.inner, family) {
            Ok(sig) => {
                *out = Box::into_raw(Box::new(SfSignature { inner: sig }));
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// 1 when the signature graph embeds exactly into the app, 0 when it does
/// not, -1 on a null handle.
#[no_mangle]
pub unsafe extern "C" fn sf_exact_match(
    signature: *const SfSignature,
    app: *const SfIccg,
) -> c_int {
    let (Ok(sig), Ok(app)) = (
        handle_arg(signature, "signature"),
        handle_arg(app, "app"),
    ) else {
        return -1;
    };
    c_int::from(exact_match(&sig.inner.graph, &app.inner).is_some())
}

/// Classifies `app` against one signature. Cutoffs must satisfy
/// 0 <= zero_day_cutoff <= obfuscated_cutoff <= 1; the library defaults are
/// 0.5 and 0.8. On success writes the verdict kind and the similarity delta.
#[no_mangle]
pub unsafe extern "C" fn sf_approx_match(
    app: *const SfIccg,
    signature: *const SfSignature,
    weights: *const SfWeights,
    zero_day_cutoff: f64,
    obfuscated_cutoff: f64,
    out_kind: *mut SfMatchKind,
    out_delta: *mut f64,
) -> SfStatus {
    guarded(|| {
        let app = match handle_arg(app, "app") {
            Ok(a) => a,
            Err(s) => return s,
        };
        let sig = match handle_arg(signature, "signature") {
            Ok(s) => s,
            Err(s) => return s,
        };
        let weights = match handle_arg(weights, "weights") {
            Ok(w) => w,
            Err(s) => return s,
        };
        if out_kind.is_null() || out_delta.is_null() {
            return null_arg("out_kind/out_delta");
        }
        if !(0.0..=1.0).contains(&zero_day_cutoff)
            || !(0.0..=1.0).contains(&obfuscated_cutoff)
            || zero_day_cutoff > obfuscated_cutoff
        {
            set_error("cutoffs must satisfy 0 <= zero_day <= obfuscated <= 1");
            return SfStatus::InvalidInput;
        }
        let cutoffs = Cutoffs {
            zero_day: BigRational::from_float(zero_day_cutoff).expect("finite cutoff"),
            obfuscated: BigRational::from_float(obfuscated_cutoff).expect("finite cutoff"),
        };
        match approx_match(&app.inner, &sig.inner, &weights.inner, &cutoffs) {
            Ok(verdict) => {
                *out_kind = match verdict.kind {
                    MatchKind::NoMatch => SfMatchKind::NoMatch,
                    MatchKind::ZeroDayCandidate => SfMatchKind::ZeroDayCandidate,
                    MatchKind::Obfuscated => SfMatchKind::Obfuscated,
                    MatchKind::Exact => SfMatchKind::Exact,
                };
                *out_delta = verdict.delta.to_f64().unwrap_or(f64::NAN);
                SfStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
